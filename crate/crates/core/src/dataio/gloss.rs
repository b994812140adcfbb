use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Annotated signing intervals of one signer, in milliseconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlossSegments {
    /// `(start_ms, end_ms)`, half-open, stored as given.
    pub segments: Vec<(f64, f64)>,
}

impl GlossSegments {
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(s, e)) in segments.iter().enumerate() {
            if !(s < e) {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} has start {s} >= end {e}"
                )));
            }
        }
        Ok(GlossSegments { segments })
    }

    pub fn contains_ms(&self, ms: f64) -> bool {
        self.segments.iter().any(|&(s, e)| s <= ms && ms < e)
    }

    /// Reads `start_ms,end_ms` rows. A leading non-numeric header row is
    /// skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut segments = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(None, format!("gloss csv row {}: {e}", row + 1)))?;
            if rec.len() != 2 {
                return Err(Error::parse(
                    None,
                    format!("gloss csv row {}: expected 2 fields, found {}", row + 1, rec.len()),
                ));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(s), Ok(e)) => segments.push((s, e)),
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::parse(
                        None,
                        format!("gloss csv row {}: non-numeric field", row + 1),
                    ))
                }
            }
        }
        GlossSegments::new(segments)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["start_ms", "end_ms"]).map_err(csv_io)?;
        for &(s, e) in &self.segments {
            w.write_record([s.to_string(), e.to_string()]).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Frame `t` is signing iff its midpoint `(t + 0.5) / fps` seconds lies in a
/// segment.
pub fn labels_from_gloss(gloss: &GlossSegments, frames: usize, fps: f64) -> Vec<u8> {
    (0..frames)
        .map(|t| u8::from(gloss.contains_ms((t as f64 + 0.5) * 1000.0 / fps)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_second_at_50fps() {
        let g = GlossSegments::new(vec![(0.0, 1000.0)]).unwrap();
        let l = labels_from_gloss(&g, 60, 50.0);
        assert!(l[..50].iter().all(|&v| v == 1));
        assert_eq!(l[50], 0);
    }

    #[test]
    fn no_segments_all_zero() {
        let l = labels_from_gloss(&GlossSegments::default(), 10, 50.0);
        assert!(l.iter().all(|&v| v == 0));
    }

    #[test]
    fn overlap_equals_union() {
        let a = GlossSegments::new(vec![(100.0, 500.0), (300.0, 900.0)]).unwrap();
        let u = GlossSegments::new(vec![(100.0, 900.0)]).unwrap();
        assert_eq!(labels_from_gloss(&a, 60, 50.0), labels_from_gloss(&u, 60, 50.0));
    }

    #[test]
    fn csv_round_trip_with_header() {
        let g = GlossSegments::new(vec![(0.0, 120.5), (800.0, 1000.0)]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("start_ms,end_ms"));
        assert_eq!(GlossSegments::read_csv(&buf[..]).unwrap(), g);
        assert_eq!(GlossSegments::read_csv(&b"10,20\n30,40\n"[..]).unwrap().segments.len(), 2);
        assert!(GlossSegments::read_csv(&b"10,20\nx,40\n"[..]).is_err());
        assert!(GlossSegments::read_csv(&b"20,10\n"[..]).is_err());
    }
}
