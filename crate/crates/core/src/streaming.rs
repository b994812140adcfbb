//! Real-time per-frame engine.
//!
//! A session consumes raw pose frames one at a time: it normalizes the
//! frame, computes flow against the previous frame's selected points,
//! advances the classifier by exactly one step and reports the signing
//! probability with the wall time the step took.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{dot, predict, Classifier, Detector, LstmState};
use crate::pose_features::{
    mean_shoulder_distance, select_points_into, flow_step_into, Landmark, NormalizationMode, PointSubset, PoseFrame,
    PoseSequence, ShoulderWindow, NUM_LANDMARKS,
};

/// Scale applied to incoming frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EngineNormalization {
    /// Fixed divisor, the mean shoulder distance of the whole sequence.
    /// Replaying a recorded sequence this way reproduces the offline
    /// pipeline.
    PerSequence { mean_shoulder: f64 },
    /// Mean shoulder distance over the last `n` frames that had both
    /// shoulders; scale 1 before the first such frame.
    TrailingWindow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub subset: PointSubset,
    pub fps: f64,
    pub normalization: EngineNormalization,
}

impl EngineConfig {
    pub fn trailing(subset: PointSubset, fps: f64, window: usize) -> Self {
        EngineConfig {
            subset,
            fps,
            normalization: EngineNormalization::TrailingWindow(window),
        }
    }

    /// Configuration that replays `seq` exactly as the offline pipeline
    /// would process it under `mode`.
    pub fn for_sequence(subset: PointSubset, seq: &PoseSequence, mode: NormalizationMode) -> Result<Self> {
        let normalization = match mode {
            NormalizationMode::PerSequence => EngineNormalization::PerSequence {
                mean_shoulder: mean_shoulder_distance(&seq.frames)?,
            },
            NormalizationMode::TrailingWindow(n) => EngineNormalization::TrailingWindow(n),
        };
        Ok(EngineConfig {
            subset,
            fps: seq.fps,
            normalization,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be > 0, got {}", self.fps)));
        }
        match self.normalization {
            EngineNormalization::PerSequence { mean_shoulder } if !(mean_shoulder > 0.0) => Err(
                Error::InvalidArgument(format!("mean shoulder distance must be > 0, got {mean_shoulder}")),
            ),
            EngineNormalization::TrailingWindow(0) => {
                Err(Error::InvalidArgument("trailing window must hold at least one frame".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOutput {
    /// Probability of signing.
    pub probability: f64,
    pub label: u8,
    /// Raw classifier output; the linear model's logit sits in column 1.
    pub logits: [f64; 2],
    /// Wall time of the step in microseconds.
    pub latency_us: f64,
}

/// Per-model recurrent state.
#[derive(Debug, Clone)]
enum ModelState {
    Lstm {
        state: LstmState,
        gates: Vec<f64>,
        cell: Vec<f64>,
        cell_tanh: Vec<f64>,
        hidden: Vec<f64>,
    },
    /// Ring of the last W feature rows; slot `t % W` holds frame `t`.
    Linear { rows: Vec<f64> },
}

/// One stream's worth of engine state. Memory use does not grow with the
/// stream length.
#[derive(Debug, Clone)]
pub struct EngineSession<'m> {
    classifier: &'m Classifier,
    config: EngineConfig,
    ring: Option<ShoulderWindow>,
    prev: Vec<Landmark>,
    cur: Vec<Landmark>,
    features: Vec<f64>,
    model_state: ModelState,
    frames: u64,
}

impl<'m> EngineSession<'m> {
    pub fn new(classifier: &'m Classifier, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.subset.dim();
        if classifier.input_dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: classifier.input_dim(),
                found: dim,
            });
        }
        let model_state = match classifier {
            Classifier::Lstm(m) => {
                let h = m.hidden_dim();
                ModelState::Lstm {
                    state: m.initial_state(),
                    gates: vec![0.0; 4 * h],
                    cell: vec![0.0; h],
                    cell_tanh: vec![0.0; h],
                    hidden: vec![0.0; h],
                }
            }
            Classifier::Linear(m) => ModelState::Linear {
                rows: vec![0.0; m.window() * dim],
            },
        };
        let ring = match config.normalization {
            EngineNormalization::TrailingWindow(n) => Some(ShoulderWindow::new(n)),
            EngineNormalization::PerSequence { .. } => None,
        };
        Ok(EngineSession {
            classifier,
            config,
            ring,
            prev: Vec::with_capacity(dim),
            cur: Vec::with_capacity(dim),
            features: vec![0.0; dim],
            model_state,
            frames: 0,
        })
    }

    /// Session for a detector loaded from a model file, normalizing with a
    /// trailing window (the detector's own window if it was trained that
    /// way, else `default_window`).
    pub fn for_detector(detector: &'m Detector, fps: f64, default_window: usize) -> Result<Self> {
        let window = match detector.normalization {
            NormalizationMode::TrailingWindow(n) => n,
            NormalizationMode::PerSequence => default_window,
        };
        EngineSession::new(&detector.classifier, EngineConfig::trailing(detector.subset, fps, window))
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Frames consumed since creation or the last reset.
    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// Returns the session to its freshly created state.
    pub fn reset(&mut self) {
        if let Some(r) = &mut self.ring {
            r.clear();
        }
        self.prev.clear();
        self.cur.clear();
        self.frames = 0;
        match &mut self.model_state {
            ModelState::Lstm { state, .. } => state.reset(),
            ModelState::Linear { rows } => rows.fill(0.0),
        }
    }

    fn divisor(&mut self, frame: &PoseFrame) -> f64 {
        match (&mut self.ring, self.config.normalization) {
            (Some(ring), _) => {
                ring.observe(frame);
                ring.divisor()
            }
            (None, EngineNormalization::PerSequence { mean_shoulder }) => mean_shoulder,
            (None, EngineNormalization::TrailingWindow(_)) => unreachable!("trailing sessions own a ring"),
        }
    }

    /// Consumes one frame.
    pub fn step(&mut self, frame: &PoseFrame) -> Result<StepOutput> {
        let started = Instant::now();
        let by = self.divisor(frame);
        select_points_into(frame, self.config.subset, &mut self.cur);
        for lm in &mut self.cur {
            lm.x /= by;
            lm.y /= by;
        }
        if self.frames == 0 {
            self.features.fill(0.0);
        } else {
            flow_step_into(&self.prev, &self.cur, self.config.fps, &mut self.features)?;
        }
        std::mem::swap(&mut self.prev, &mut self.cur);

        let logits = match (&mut self.model_state, self.classifier) {
            (
                ModelState::Lstm {
                    state,
                    gates,
                    cell,
                    cell_tanh,
                    hidden,
                },
                Classifier::Lstm(m),
            ) => {
                m.cell_forward(&self.features, &state.hidden, &state.cell, gates, cell, cell_tanh, hidden);
                std::mem::swap(&mut state.hidden, hidden);
                std::mem::swap(&mut state.cell, cell);
                m.project(&state.hidden)
            }
            (ModelState::Linear { rows }, Classifier::Linear(m)) => {
                let (w, d) = (m.window(), m.input_dim());
                let slot = (self.frames % w as u64) as usize;
                rows[slot * d..(slot + 1) * d].copy_from_slice(&self.features);
                let weights = m.weights();
                let z: f64 = (0..w)
                    .map(|k| {
                        let s = (slot + 1 + k) % w;
                        dot(&rows[s * d..(s + 1) * d], &weights[k * d..(k + 1) * d])
                    })
                    .sum();
                [0.0, z]
            }
            _ => unreachable!("model state matches the classifier"),
        };
        self.frames += 1;
        let p = predict(logits);
        Ok(StepOutput {
            probability: p.probability,
            label: p.label,
            logits,
            latency_us: started.elapsed().as_secs_f64() * 1e6,
        })
    }
}

/// Latency statistics in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub frames: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
    /// `1e6 / mean_us`.
    pub frames_per_s: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over `samples`.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |q: f64| s[((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        Ok(LatencyStats {
            frames: s.len(),
            mean_us: mean,
            p50_us: rank(0.5),
            p99_us: rank(0.99),
            max_us: s[s.len() - 1],
            frames_per_s: if mean > 0.0 { 1e6 / mean } else { f64::INFINITY },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub model: String,
    pub subset: PointSubset,
    pub runs: Vec<LatencyStats>,
    pub pooled: LatencyStats,
}

impl BenchReport {
    /// Aligned text table, one row per repetition plus the pooled row.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {}\n{:<8}{:>8}{:>11}{:>11}{:>11}{:>11}{:>12}\n",
            self.model, self.subset, "run", "frames", "mean_us", "p50_us", "p99_us", "max_us", "frames/s"
        );
        let rows = self
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| ((i + 1).to_string(), r))
            .chain([("pooled".to_string(), &self.pooled)]);
        for (name, r) in rows {
            out.push_str(&format!(
                "{:<8}{:>8}{:>11.2}{:>11.2}{:>11.2}{:>11.2}{:>12.1}\n",
                name, r.frames, r.mean_us, r.p50_us, r.p99_us, r.max_us, r.frames_per_s
            ));
        }
        out
    }

    /// `model,subset,run,frames,mean_us,p50_us,p99_us,max_us,frames_per_s`
    /// rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,subset,run,frames,mean_us,p50_us,p99_us,max_us,frames_per_s\n");
        let rows = self
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| ((i + 1).to_string(), r))
            .chain([("pooled".to_string(), &self.pooled)]);
        for (name, r) in rows {
            out.push_str(&format!(
                "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
                self.model, self.subset, name, r.frames, r.mean_us, r.p50_us, r.p99_us, r.max_us, r.frames_per_s
            ));
        }
        out
    }
}

/// Random-walk pose frames with every landmark present.
pub fn random_frames(n: usize, seed: u64) -> Vec<PoseFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lm: Vec<Landmark> = (0..NUM_LANDMARKS)
        .map(|_| Landmark::new(rng.random_range(200.0..1000.0), rng.random_range(100.0..700.0), 0.9))
        .collect();
    (0..n)
        .map(|_| {
            for l in &mut lm {
                l.x += rng.random_range(-3.0..3.0);
                l.y += rng.random_range(-3.0..3.0);
            }
            PoseFrame::new(lm.clone()).expect("full frame")
        })
        .collect()
}

/// Times `step` over `frames` random frames, `repetitions` times, after an
/// untimed warm-up pass. Each repetition uses a fresh session.
pub fn bench(classifier: &Classifier, subset: PointSubset, frames: usize, repetitions: usize) -> Result<BenchReport> {
    if frames < 1000 || repetitions < 3 {
        return Err(Error::InvalidArgument(format!(
            "bench needs at least 1000 frames and 3 repetitions, got {frames} x {repetitions}"
        )));
    }
    let input = random_frames(frames, 7);
    let cfg = EngineConfig::trailing(subset, 50.0, crate::pose_features::DEFAULT_TRAILING_WINDOW);
    let mut session = EngineSession::new(classifier, cfg)?;
    for f in input.iter().take(200) {
        session.step(f)?;
    }
    let mut all = Vec::with_capacity(frames * repetitions);
    let mut runs = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        session.reset();
        let mut lat = Vec::with_capacity(frames);
        for f in &input {
            lat.push(session.step(f)?.latency_us);
        }
        runs.push(LatencyStats::from_samples(&lat)?);
        all.extend(lat);
    }
    Ok(BenchReport {
        model: classifier.kind_name(),
        subset,
        runs,
        pooled: LatencyStats::from_samples(&all)?,
    })
}

/// One input line of the stream protocol.
#[derive(Debug, Clone, Deserialize)]
struct InputLine {
    t: u64,
    points: Vec<Option<[f64; 3]>>,
}

#[derive(Debug, Clone, Serialize)]
struct OutputLine {
    t: u64,
    p: f64,
    signing: u8,
    us: f64,
}

/// Parses `{"t": index, "points": [[x, y, c] x 137]}`. A `null` point is
/// missing.
pub fn parse_stream_line(line: &str) -> Result<(u64, PoseFrame)> {
    let input: InputLine = serde_json::from_str(line).map_err(|e| Error::parse(None, e.to_string()))?;
    if input.points.len() != NUM_LANDMARKS {
        return Err(Error::parse(
            Some(input.t as usize),
            format!("{} points, expected {NUM_LANDMARKS}", input.points.len()),
        ));
    }
    let lm = input
        .points
        .iter()
        .map(|p| p.map_or(Landmark::MISSING, |[x, y, c]| Landmark::new(x, y, c)))
        .collect();
    Ok((input.t, PoseFrame::new(lm)?))
}

pub fn format_stream_line(t: u64, out: &StepOutput) -> String {
    serde_json::to_string(&OutputLine {
        t,
        p: out.probability,
        signing: out.label,
        us: (out.latency_us * 1000.0).round() / 1000.0,
    })
    .expect("plain numbers serialize")
}

/// Inverse of [`parse_stream_line`], for fixtures.
pub fn frame_to_stream_line(t: u64, frame: &PoseFrame) -> String {
    let points: Vec<Option<[f64; 3]>> = frame
        .landmarks()
        .iter()
        .map(|l| l.is_present().then_some([l.x, l.y, l.confidence]))
        .collect();
    serde_json::json!({ "t": t, "points": points }).to_string()
}
