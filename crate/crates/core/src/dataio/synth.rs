//! Seeded synthetic pose corpus.
//!
//! Each sequence alternates signing and not-signing spans with exponentially
//! distributed lengths. While signing, both arms (wrists, elbows and hand
//! landmarks) follow smooth random oscillations; every sign cycle ends with
//! a short hold where the hands stay still, so single-frame speed alone is
//! not enough to tag every signing frame. While not signing the pose is
//! static apart from landmark jitter and occasional face-touch excursions of
//! the right hand, which move as fast as signing does for a fraction of a
//! second. Shoulder width is constant within a sequence and varies between
//! sequences, so shoulder normalization matters.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::gloss::GlossSegments;
use crate::pose_features::{body, Landmark, Part, PoseFrame, PoseSequence, SourceId, NUM_LANDMARKS};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub sequences: usize,
    pub fps: f64,
    /// Length of every sequence, seconds.
    pub duration_s: f64,
    pub mean_signing_s: f64,
    pub mean_not_signing_s: f64,
    /// Peak hand displacement while signing, shoulder widths.
    pub signing_amplitude: f64,
    /// Face-touch events per hour of not-signing time.
    pub ambient_rate_per_hour: f64,
    /// Peak hand displacement of a face touch, shoulder widths.
    pub ambient_amplitude: f64,
    /// Standard deviation of landmark jitter, shoulder widths.
    pub noise: f64,
    /// Shoulder width range in pixels; one width is drawn per sequence.
    pub shoulder_px: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            sequences: 100,
            fps: 50.0,
            duration_s: 30.0,
            mean_signing_s: 4.0,
            mean_not_signing_s: 3.8,
            signing_amplitude: 0.35,
            ambient_rate_per_hour: 20.0,
            ambient_amplitude: 0.3,
            noise: 0.002,
            shoulder_px: (80.0, 240.0),
        }
    }
}

/// One generated stream with its annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub poses: PoseSequence,
    pub gloss: GlossSegments,
    /// Frame labels the motion was generated from.
    pub labels: Vec<u8>,
}

/// Shortest span the generator emits, seconds.
const MIN_SPAN_S: f64 = 0.6;
/// Envelope ramp at each end of a signing span, seconds.
const RAMP_S: f64 = 0.1;
/// Fraction of each sign cycle spent moving; the rest is a hold.
const MOVE_FRACTION: f64 = 0.8;
const FACE_TOUCH_S: f64 = 0.6;

/// Rest pose in shoulder-width units relative to the neck (y grows down).
fn rest_pose() -> Vec<Landmark> {
    let mut lm = vec![Landmark::MISSING; NUM_LANDMARKS];
    let body_pts: [(usize, f64, f64); 15] = [
        (body::NOSE, 0.0, -0.55),
        (body::NECK, 0.0, 0.0),
        (body::RIGHT_SHOULDER, -0.5, 0.02),
        (body::RIGHT_ELBOW, -0.6, 0.6),
        (body::RIGHT_WRIST, -0.45, 1.1),
        (body::LEFT_SHOULDER, 0.5, 0.02),
        (body::LEFT_ELBOW, 0.6, 0.6),
        (body::LEFT_WRIST, 0.45, 1.1),
        (body::MID_HIP, 0.0, 1.4),
        (body::RIGHT_HIP, -0.25, 1.4),
        (body::LEFT_HIP, 0.25, 1.4),
        (body::RIGHT_EYE, -0.1, -0.65),
        (body::LEFT_EYE, 0.1, -0.65),
        (body::RIGHT_EAR, -0.22, -0.6),
        (body::LEFT_EAR, 0.22, -0.6),
    ];
    for (i, x, y) in body_pts {
        lm[i] = Landmark::present(x, y);
    }
    for (k, slot) in Part::Face.range().enumerate() {
        let a = 2.0 * PI * k as f64 / Part::Face.len() as f64;
        lm[slot] = Landmark::present(0.22 * a.cos(), -0.55 + 0.3 * a.sin());
    }
    for (part, wrist, side) in [(Part::LeftHand, body::LEFT_WRIST, 1.0), (Part::RightHand, body::RIGHT_WRIST, -1.0)] {
        let w = lm[wrist];
        for (k, slot) in part.range().enumerate() {
            if k == 0 {
                lm[slot] = w;
                continue;
            }
            let finger = (k - 1) / 4;
            let joint = ((k - 1) % 4 + 1) as f64;
            let a = PI / 2.0 + side * (finger as f64 - 2.0) * 0.25;
            lm[slot] = Landmark::present(w.x + 0.035 * joint * a.cos() * side, w.y + 0.035 * joint * a.sin());
        }
    }
    lm
}

/// Smooth 2-D oscillation of one arm.
#[derive(Debug, Clone, Copy)]
struct Oscillator {
    freq: [f64; 2],
    phase: [f64; 4],
}

impl Oscillator {
    fn random<R: Rng>(rng: &mut R) -> Self {
        Oscillator {
            freq: [rng.random_range(0.9..1.6), rng.random_range(1.7..2.6)],
            phase: [(); 4].map(|_| rng.random_range(0.0..2.0 * PI)),
        }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let [f1, f2] = self.freq;
        let p = self.phase;
        (
            (2.0 * PI * f1 * t + p[0]).sin() + 0.5 * (2.0 * PI * f2 * t + p[1]).sin(),
            (2.0 * PI * f1 * t + p[2]).cos() + 0.5 * (2.0 * PI * f2 * t + p[3]).sin(),
        )
    }
}

/// Time warp that freezes motion for the last part of every sign cycle.
fn held_time(t: f64, cycle: f64) -> f64 {
    let k = (t / cycle).floor();
    let u = t / cycle - k;
    cycle * (k + (u / MOVE_FRACTION).min(1.0))
}

/// 0..1 envelope over a signing span `[a, b)` in frames.
fn envelope(t: usize, a: usize, b: usize, ramp: f64) -> f64 {
    let rise = (t - a) as f64 / ramp;
    let fall = (b - 1 - t) as f64 / ramp;
    let r = rise.min(fall).min(1.0);
    0.5 * (1.0 - (PI * r).cos())
}

fn spans<R: Rng>(rng: &mut R, cfg: &SynthConfig, frames: usize) -> Vec<(usize, usize, u8)> {
    let min_f = (MIN_SPAN_S * cfg.fps).round().max(1.0);
    let exp = |mean_s: f64| Exp::new(1.0 / ((mean_s - MIN_SPAN_S).max(1e-3) * cfg.fps)).expect("positive rate");
    let (sign, rest) = (exp(cfg.mean_signing_s), exp(cfg.mean_not_signing_s));
    let mut out = Vec::new();
    let mut label = u8::from(rng.random_bool(0.5));
    let mut t = 0;
    while t < frames {
        let extra = if label == 1 { sign.sample(rng) } else { rest.sample(rng) };
        let len = (min_f + extra).round() as usize;
        let end = (t + len).min(frames);
        out.push((t, end, label));
        t = end;
        label ^= 1;
    }
    out
}

fn generate_one(rng: &mut ChaCha8Rng, cfg: &SynthConfig, index: usize) -> SynthSequence {
    let frames = (cfg.duration_s * cfg.fps).round().max(1.0) as usize;
    let fps = cfg.fps;
    let width = rng.random_range(cfg.shoulder_px.0..=cfg.shoulder_px.1);
    let origin = (rng.random_range(540.0..740.0), rng.random_range(200.0..300.0));
    let cycle = rng.random_range(0.5..0.9);
    let arms = [Oscillator::random(rng), Oscillator::random(rng)];
    let finger_phase: Vec<f64> = (0..42).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let jitter = Normal::new(0.0, cfg.noise.max(0.0)).expect("finite noise");
    let conf = |rng: &mut ChaCha8Rng| rng.random_range(0.6..1.0);

    let span_list = spans(rng, cfg, frames);
    let mut labels = vec![0u8; frames];
    for &(a, b, l) in &span_list {
        labels[a..b].fill(l);
    }

    // Face touches inside not-signing spans: per-frame offset of the right arm.
    let mut touch = vec![0.0f64; frames];
    let touch_len = (FACE_TOUCH_S * fps).round() as usize;
    let rate_per_frame = cfg.ambient_rate_per_hour / 3600.0 / fps;
    for &(a, b, l) in &span_list {
        if l == 1 || rate_per_frame <= 0.0 || b - a < touch_len + 2 {
            continue;
        }
        let mut t = a + 1;
        while t + touch_len < b {
            if rng.random_bool(rate_per_frame.min(1.0)) {
                for k in 0..touch_len {
                    let s = (PI * k as f64 / touch_len as f64).sin();
                    touch[t + k] = s * s;
                }
                t += touch_len + 1;
            } else {
                t += 1;
            }
        }
    }

    let rest = rest_pose();
    let nose = rest[body::NOSE];
    let r_wrist = rest[body::RIGHT_WRIST];
    let to_face = {
        let (dx, dy) = (nose.x - r_wrist.x, nose.y - r_wrist.y);
        let n = dx.hypot(dy);
        (dx / n, dy / n)
    };
    let ramp = (RAMP_S * fps).max(1.0);
    let mut span_of = vec![(0usize, 0usize); frames];
    for &(a, b, _) in &span_list {
        span_of[a..b].fill((a, b));
    }

    let mut out_frames = Vec::with_capacity(frames);
    for t in 0..frames {
        let mut lm = rest.clone();
        // arm offsets: index 0 right arm, 1 left arm
        let mut offset = [(0.0, 0.0); 2];
        if labels[t] == 1 {
            let (a, b) = span_of[t];
            let env = envelope(t, a, b, ramp);
            let th = held_time(t as f64 / fps, cycle);
            for (arm, gain) in [(0usize, 1.0), (1, 0.6)] {
                let (ox, oy) = arms[arm].at(th);
                offset[arm] = (cfg.signing_amplitude * gain * env * ox / 1.5, cfg.signing_amplitude * gain * env * oy / 1.5);
            }
        } else if touch[t] > 0.0 {
            let s = cfg.ambient_amplitude * touch[t];
            offset[0] = (s * to_face.0, s * to_face.1);
        }

        let th = held_time(t as f64 / fps, cycle);
        for (arm, (wrist, elbow, hand)) in [
            (body::RIGHT_WRIST, body::RIGHT_ELBOW, Part::RightHand),
            (body::LEFT_WRIST, body::LEFT_ELBOW, Part::LeftHand),
        ]
        .into_iter()
        .enumerate()
        {
            let (dx, dy) = offset[arm];
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            lm[wrist].x += dx;
            lm[wrist].y += dy;
            lm[elbow].x += 0.5 * dx;
            lm[elbow].y += 0.5 * dy;
            let mag = dx.hypot(dy);
            for (k, slot) in hand.range().enumerate() {
                let wiggle = if labels[t] == 1 && k > 0 {
                    0.15 * mag * (2.0 * PI * 2.0 * th + finger_phase[arm * 21 + k]).sin()
                } else {
                    0.0
                };
                lm[slot].x += dx + wiggle;
                lm[slot].y += dy + wiggle;
            }
        }

        let landmarks = lm
            .into_iter()
            .map(|l| {
                if !l.is_present() {
                    return Landmark::MISSING;
                }
                let (nx, ny) = if cfg.noise > 0.0 {
                    (jitter.sample(rng), jitter.sample(rng))
                } else {
                    (0.0, 0.0)
                };
                Landmark::new(origin.0 + width * (l.x + nx), origin.1 + width * (l.y + ny), conf(rng))
            })
            .collect();
        out_frames.push(PoseFrame::new(landmarks).expect("137 landmarks"));
    }

    // Shoulders are exactly one width apart: they never move and carry no
    // jitter of their own relative to each other.
    for f in &mut out_frames {
        let l = f.landmarks()[body::LEFT_SHOULDER];
        let r = &mut f.landmarks_mut()[body::RIGHT_SHOULDER];
        r.x = l.x - width;
        r.y = l.y;
    }

    let ms = |frame: usize| frame as f64 * 1000.0 / fps;
    let gloss = GlossSegments {
        segments: span_list
            .iter()
            .filter(|s| s.2 == 1)
            .map(|&(a, b, _)| (ms(a), ms(b)))
            .collect(),
    };
    let source = SourceId::new(format!("synth{:04}", index / 2), if index.is_multiple_of(2) { "a" } else { "b" });
    SynthSequence {
        poses: PoseSequence::new(out_frames, fps, source).expect("valid fps and frames"),
        gloss,
        labels,
    }
}

/// Generates `cfg.sequences` streams, two signers per synthetic video.
pub fn synth_corpus(cfg: &SynthConfig) -> Vec<SynthSequence> {
    assert!(cfg.fps > 0.0, "fps must be positive");
    assert!(
        cfg.signing_amplitude > cfg.ambient_amplitude,
        "signing amplitude must exceed ambient amplitude"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.sequences).map(|i| generate_one(&mut rng, cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::labels_from_gloss;
    use crate::pose_features::{extract_features, normalize_sequence, shoulder_distance, PointSubset};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            sequences: 6,
            duration_s: 12.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(synth_corpus(&small(5)), synth_corpus(&small(5)));
        assert_ne!(synth_corpus(&small(5)), synth_corpus(&small(6)));
    }

    #[test]
    fn labels_match_gloss() {
        for s in synth_corpus(&small(1)) {
            assert_eq!(labels_from_gloss(&s.gloss, s.poses.len(), s.poses.fps), s.labels);
        }
    }

    #[test]
    fn constant_shoulders() {
        for s in synth_corpus(&small(2)) {
            let d0 = shoulder_distance(&s.poses.frames[0]).unwrap();
            for f in &s.poses.frames {
                assert!((shoulder_distance(f).unwrap() - d0).abs() < 1e-9 * d0);
            }
        }
    }

    #[test]
    fn quiet_config_has_no_rest_motion() {
        let cfg = SynthConfig {
            noise: 0.0,
            ambient_rate_per_hour: 0.0,
            ..small(3)
        };
        for s in synth_corpus(&cfg) {
            let f = extract_features(&normalize_sequence(&s.poses).unwrap(), PointSubset::PoseAll).unwrap();
            for t in 1..s.labels.len() {
                if s.labels[t] == 0 && s.labels[t - 1] == 0 {
                    assert!(f.row(t).iter().all(|&v| v == 0.0), "motion at rest frame {t}");
                }
            }
        }
    }

    #[test]
    fn signing_moves_faster_than_rest() {
        let corpus = synth_corpus(&small(4));
        let (mut sign, mut rest, mut ns, mut nr) = (0.0, 0.0, 0, 0);
        for s in &corpus {
            let f = extract_features(&normalize_sequence(&s.poses).unwrap(), PointSubset::PoseBody).unwrap();
            for t in 0..s.labels.len() {
                let v = f[[t, body::RIGHT_WRIST]];
                if s.labels[t] == 1 {
                    sign += v;
                    ns += 1;
                } else {
                    rest += v;
                    nr += 1;
                }
            }
        }
        assert!(sign / ns as f64 > 5.0 * rest / nr as f64);
    }
}
