//! Frame accuracy, span statistics and the span-level error taxonomy.
//!
//! Mismatch frames (pred ≠ gold) are grouped into maximal runs, every run is
//! cut at gold-span boundaries, and each piece is named after the gold value
//! it lies in and which *real* ends of its gold span it touches. A real end
//! is one shared with a neighbouring gold span; the start and end of the
//! sequence are not real ends.
//!
//! | gold | both ends | left only | right only | neither |
//! |------|-----------|-----------|------------|---------|
//! | 0    | Bridged   | SigningOverflow | StartedPreSigning | SigningDetectedIncorrectly |
//! | 1    | Skipped   | StartedPostSigning | SigningUnderflow | SigningUndetectedIncorrectly |

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Half-open run `[start, end)` of frames sharing one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: u8,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ErrorType {
    Bridged,
    SigningDetectedIncorrectly,
    SigningOverflow,
    StartedPreSigning,
    Skipped,
    SigningUndetectedIncorrectly,
    StartedPostSigning,
    SigningUnderflow,
}

impl ErrorType {
    pub const ALL: [ErrorType; 8] = [
        ErrorType::Bridged,
        ErrorType::SigningDetectedIncorrectly,
        ErrorType::SigningOverflow,
        ErrorType::StartedPreSigning,
        ErrorType::Skipped,
        ErrorType::SigningUndetectedIncorrectly,
        ErrorType::StartedPostSigning,
        ErrorType::SigningUnderflow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::Bridged => "bridged",
            ErrorType::SigningDetectedIncorrectly => "signing-detected-incorrectly",
            ErrorType::SigningOverflow => "signing-overflow",
            ErrorType::StartedPreSigning => "started-pre-signing",
            ErrorType::Skipped => "skipped",
            ErrorType::SigningUndetectedIncorrectly => "signing-undetected-incorrectly",
            ErrorType::StartedPostSigning => "started-post-signing",
            ErrorType::SigningUnderflow => "signing-underflow",
        }
    }

    /// The type the same mismatch gets when both gold and prediction are
    /// complemented.
    pub fn complement(self) -> ErrorType {
        use ErrorType::*;
        match self {
            Bridged => Skipped,
            Skipped => Bridged,
            SigningDetectedIncorrectly => SigningUndetectedIncorrectly,
            SigningUndetectedIncorrectly => SigningDetectedIncorrectly,
            SigningOverflow => StartedPostSigning,
            StartedPostSigning => SigningOverflow,
            StartedPreSigning => SigningUnderflow,
            SigningUnderflow => StartedPreSigning,
        }
    }

    /// Whether the model claimed signing where there was none.
    pub fn is_false_signing(self) -> bool {
        (self as usize) < 4
    }

    fn from_gold_and_ends(gold: u8, left: bool, right: bool) -> ErrorType {
        use ErrorType::*;
        match (gold, left, right) {
            (0, true, true) => Bridged,
            (0, true, false) => SigningOverflow,
            (0, false, true) => StartedPreSigning,
            (0, false, false) => SigningDetectedIncorrectly,
            (_, true, true) => Skipped,
            (_, true, false) => StartedPostSigning,
            (_, false, true) => SigningUnderflow,
            (_, false, false) => SigningUndetectedIncorrectly,
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEvent {
    pub error_type: ErrorType,
    /// Mismatch frames; `label` holds the gold value.
    pub span: Span,
    pub duration_s: f64,
}

fn check_pair(a: &[u8], b: &[u8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn frame_accuracy(pred: &[u8], gold: &[u8]) -> Result<f64> {
    check_pair(gold, pred)?;
    if gold.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ok = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(ok as f64 / gold.len() as f64)
}

/// Maximal runs of equal labels, in order.
pub fn extract_spans(labels: &[u8]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[start] {
            out.push(Span {
                start,
                end: t,
                label: labels[start],
            });
            start = t;
        }
    }
    out
}

pub fn classify_errors(gold: &[u8], pred: &[u8], fps: f64) -> Result<Vec<ErrorEvent>> {
    check_pair(gold, pred)?;
    if !(fps > 0.0) {
        return Err(Error::InvalidArgument(format!("fps must be > 0, got {fps}")));
    }
    let n = gold.len();
    let mut events = Vec::new();
    for g in extract_spans(gold) {
        let real_left = g.start > 0;
        let real_right = g.end < n;
        let mut t = g.start;
        while t < g.end {
            if pred[t] == gold[t] {
                t += 1;
                continue;
            }
            let s = t;
            while t < g.end && pred[t] != gold[t] {
                t += 1;
            }
            let left = real_left && s == g.start;
            let right = real_right && t == g.end;
            events.push(ErrorEvent {
                error_type: ErrorType::from_gold_and_ends(g.label, left, right),
                span: Span {
                    start: s,
                    end: t,
                    label: g.label,
                },
                duration_s: (t - s) as f64 / fps,
            });
        }
    }
    Ok(events)
}

/// Count and duration statistics of a set of durations. The standard
/// deviation is the population one; both statistics are `None` when empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurationStats {
    pub count: usize,
    pub mean_s: Option<f64>,
    pub std_s: Option<f64>,
}

impl DurationStats {
    pub fn from_durations(d: &[f64]) -> Self {
        if d.is_empty() {
            return DurationStats {
                count: 0,
                mean_s: None,
                std_s: None,
            };
        }
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        DurationStats {
            count: d.len(),
            mean_s: Some(mean),
            std_s: Some(var.sqrt()),
        }
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub rows: Vec<(ErrorType, DurationStats)>,
}

impl ErrorReport {
    pub fn get(&self, t: ErrorType) -> DurationStats {
        self.rows
            .iter()
            .find(|(k, _)| *k == t)
            .map(|r| r.1)
            .expect("every type has a row")
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.1.count).sum()
    }

    /// `type,count,mean_s,std_s` with a header line; empty statistics are
    /// blank fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,count,mean_s,std_s\n");
        for (t, s) in &self.rows {
            out.push_str(&format!("{t},{},{},{}\n", s.count, opt(s.mean_s, 6), opt(s.std_s, 6)));
        }
        out
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<32}{:>7}{:>10}{:>10}", "error type", "count", "mean s", "std s")?;
        for (t, s) in &self.rows {
            writeln!(
                f,
                "{:<32}{:>7}{:>10}{:>10}",
                t.name(),
                s.count,
                opt(s.mean_s, 3),
                opt(s.std_s, 3)
            )?;
        }
        Ok(())
    }
}

/// Per-type statistics over `events`, one row per type in [`ErrorType::ALL`]
/// order.
pub fn error_report(events: &[ErrorEvent]) -> ErrorReport {
    let rows = ErrorType::ALL
        .iter()
        .map(|&t| {
            let d: Vec<f64> = events
                .iter()
                .filter(|e| e.error_type == t)
                .map(|e| e.duration_s)
                .collect();
            (t, DurationStats::from_durations(&d))
        })
        .collect();
    ErrorReport { rows }
}

/// Span statistics per label value: `[not-signing, signing]`.
pub fn sequence_stats(labels: &[u8], fps: f64) -> [DurationStats; 2] {
    let spans = extract_spans(labels);
    [0u8, 1].map(|l| {
        let d: Vec<f64> = spans
            .iter()
            .filter(|s| s.label == l)
            .map(|s| s.len() as f64 / fps)
            .collect();
        DurationStats::from_durations(&d)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    fn types(gold: &str, pred: &str) -> Vec<(ErrorType, usize, usize)> {
        classify_errors(&bits(gold), &bits(pred), 1.0)
            .unwrap()
            .into_iter()
            .map(|e| (e.error_type, e.span.start, e.span.end))
            .collect()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(frame_accuracy(&bits("0111"), &bits("0011")).unwrap(), 0.75);
        assert_eq!(frame_accuracy(&bits("01"), &bits("01")).unwrap(), 1.0);
        assert_eq!(frame_accuracy(&bits("10"), &bits("01")).unwrap(), 0.0);
        assert!(matches!(frame_accuracy(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(frame_accuracy(&[0], &[0, 1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn span_examples() {
        assert_eq!(
            extract_spans(&bits("000111")),
            vec![Span { start: 0, end: 3, label: 0 }, Span { start: 3, end: 6, label: 1 }]
        );
        assert!(extract_spans(&[]).is_empty());
        assert_eq!(extract_spans(&[1]), vec![Span { start: 0, end: 1, label: 1 }]);
    }

    #[test]
    fn bridged() {
        assert_eq!(types("111000111", "111111111"), vec![(ErrorType::Bridged, 3, 6)]);
    }

    #[test]
    fn late_start_and_early_end() {
        assert_eq!(types("000111000", "000011000"), vec![(ErrorType::StartedPostSigning, 3, 4)]);
        assert_eq!(
            types("000111000", "000010000"),
            vec![(ErrorType::StartedPostSigning, 3, 4), (ErrorType::SigningUnderflow, 5, 6)]
        );
    }

    #[test]
    fn each_type_once() {
        use ErrorType::*;
        assert_eq!(types("1100011", "1110011"), vec![(SigningOverflow, 2, 3)]);
        assert_eq!(types("1100011", "1100111"), vec![(StartedPreSigning, 4, 5)]);
        assert_eq!(types("1100011", "1101011"), vec![(SigningDetectedIncorrectly, 3, 4)]);
        assert_eq!(types("0011100", "0000000"), vec![(Skipped, 2, 5)]);
        assert_eq!(types("0011100", "0010100"), vec![(SigningUndetectedIncorrectly, 3, 4)]);
    }

    #[test]
    fn sequence_edges_are_not_real_boundaries() {
        use ErrorType::*;
        assert_eq!(types("000111", "111111"), vec![(StartedPreSigning, 0, 3)]);
        assert_eq!(types("111000", "111111"), vec![(SigningOverflow, 3, 6)]);
        assert_eq!(types("0000", "1111"), vec![(SigningDetectedIncorrectly, 0, 4)]);
        assert_eq!(types("1111", "0000"), vec![(SigningUndetectedIncorrectly, 0, 4)]);
    }

    #[test]
    fn runs_split_at_gold_boundaries() {
        use ErrorType::*;
        // one mismatch run 2..6 crossing a gold boundary at 4
        assert_eq!(
            types("00001111", "00110000"),
            vec![(StartedPreSigning, 2, 4), (StartedPostSigning, 4, 8)]
        );
    }

    #[test]
    fn report_examples() {
        let r = error_report(&[]);
        assert_eq!(r.total(), 0);
        assert!(r.rows.iter().all(|(_, s)| s.count == 0 && s.mean_s.is_none()));
        let ev = |d: f64| ErrorEvent {
            error_type: ErrorType::Bridged,
            span: Span { start: 0, end: 1, label: 0 },
            duration_s: d,
        };
        let r = error_report(&[ev(1.0), ev(3.0)]);
        let b = r.get(ErrorType::Bridged);
        assert_eq!((b.count, b.mean_s, b.std_s), (2, Some(2.0), Some(1.0)));
        let csv = r.to_csv();
        assert!(csv.starts_with("type,count,mean_s,std_s\nbridged,2,2.000000,1.000000\n"));
        assert!(csv.contains("skipped,0,,\n"));
        assert_eq!(r.to_string().lines().count(), 9);
    }

    #[test]
    fn sequence_stats_examples() {
        let mut labels = vec![0u8; 10];
        labels.extend(vec![1; 50]);
        labels.extend(vec![0; 10]);
        labels.extend(vec![1; 150]);
        let [zero, one] = sequence_stats(&labels, 50.0);
        assert_eq!((one.count, one.mean_s, one.std_s), (2, Some(2.0), Some(1.0)));
        assert_eq!(zero.count, 2);
        assert_eq!(sequence_stats(&[0; 20], 50.0)[1].count, 0);
    }

    fn labels(max: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (0..=max).prop_flat_map(|n| (proptest::collection::vec(0u8..2, n), proptest::collection::vec(0u8..2, n)))
    }

    proptest! {
        #[test]
        fn partition_and_symmetry((gold, pred) in labels(60)) {
            let ev = classify_errors(&gold, &pred, 25.0).unwrap();
            let mismatches = gold.iter().zip(&pred).filter(|(a, b)| a != b).count();
            prop_assert_eq!(ev.iter().map(|e| e.span.len()).sum::<usize>(), mismatches);
            for e in &ev {
                prop_assert!(e.duration_s > 0.0);
                prop_assert!((e.span.start..e.span.end).all(|t| gold[t] != pred[t] && gold[t] == e.span.label));
                prop_assert_eq!(e.error_type.is_false_signing(), e.span.label == 0);
            }
            let flip = |v: &[u8]| v.iter().map(|x| 1 - x).collect::<Vec<_>>();
            let ev2 = classify_errors(&flip(&gold), &flip(&pred), 25.0).unwrap();
            prop_assert_eq!(ev.len(), ev2.len());
            for (a, b) in ev.iter().zip(&ev2) {
                prop_assert_eq!(a.error_type.complement(), b.error_type);
                prop_assert_eq!((a.span.start, a.span.end), (b.span.start, b.span.end));
            }
            if !gold.is_empty() {
                let acc = frame_accuracy(&pred, &gold).unwrap();
                prop_assert!((acc - (1.0 - mismatches as f64 / gold.len() as f64)).abs() < 1e-12);
            }
        }

        #[test]
        fn perfect_prediction_has_no_events(gold in proptest::collection::vec(0u8..2, 0..50)) {
            prop_assert!(classify_errors(&gold, &gold, 50.0).unwrap().is_empty());
        }

        #[test]
        fn spans_cover_and_alternate(l in proptest::collection::vec(0u8..2, 0..50)) {
            let s = extract_spans(&l);
            prop_assert_eq!(s.iter().map(Span::len).sum::<usize>(), l.len());
            for w in s.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
                prop_assert_ne!(w[0].label, w[1].label);
            }
        }
    }
}
