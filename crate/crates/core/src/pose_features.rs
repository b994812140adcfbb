//! Pose data model, shoulder normalization, point subsets and optical-flow
//! norm features.
//!
//! A frame holds 137 landmarks in the body / face / left hand / right hand
//! order of the corpus pose export. Features are per-landmark speeds:
//! `||p_t - p_{t-1}|| * fps`, with any landmark missing in either frame
//! contributing exactly zero.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_LANDMARKS: usize = 137;

/// Default trailing window used by the streaming engine, in frames.
pub const DEFAULT_TRAILING_WINDOW: usize = 50;

/// Named indices into the 25-point body layout.
pub mod body {
    pub const NOSE: usize = 0;
    pub const NECK: usize = 1;
    pub const RIGHT_SHOULDER: usize = 2;
    pub const RIGHT_ELBOW: usize = 3;
    pub const RIGHT_WRIST: usize = 4;
    pub const LEFT_SHOULDER: usize = 5;
    pub const LEFT_ELBOW: usize = 6;
    pub const LEFT_WRIST: usize = 7;
    pub const MID_HIP: usize = 8;
    pub const RIGHT_HIP: usize = 9;
    pub const RIGHT_KNEE: usize = 10;
    pub const RIGHT_ANKLE: usize = 11;
    pub const LEFT_HIP: usize = 12;
    pub const LEFT_KNEE: usize = 13;
    pub const LEFT_ANKLE: usize = 14;
    pub const RIGHT_EYE: usize = 15;
    pub const LEFT_EYE: usize = 16;
    pub const RIGHT_EAR: usize = 17;
    pub const LEFT_EAR: usize = 18;
    pub const LEFT_BIG_TOE: usize = 19;
    pub const LEFT_SMALL_TOE: usize = 20;
    pub const LEFT_HEEL: usize = 21;
    pub const RIGHT_BIG_TOE: usize = 22;
    pub const RIGHT_SMALL_TOE: usize = 23;
    pub const RIGHT_HEEL: usize = 24;

    pub const NAMES: [&str; 25] = [
        "nose",
        "neck",
        "right_shoulder",
        "right_elbow",
        "right_wrist",
        "left_shoulder",
        "left_elbow",
        "left_wrist",
        "mid_hip",
        "right_hip",
        "right_knee",
        "right_ankle",
        "left_hip",
        "left_knee",
        "left_ankle",
        "right_eye",
        "left_eye",
        "right_ear",
        "left_ear",
        "left_big_toe",
        "left_small_toe",
        "left_heel",
        "right_big_toe",
        "right_small_toe",
        "right_heel",
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Landmark {
    pub const MISSING: Landmark = Landmark {
        x: 0.0,
        y: 0.0,
        confidence: 0.0,
    };

    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Landmark { x, y, confidence }
    }

    pub fn present(x: f64, y: f64) -> Self {
        Landmark::new(x, y, 1.0)
    }

    #[inline]
    pub fn is_present(&self) -> bool {
        self.confidence > 0.0
    }

    pub fn distance(&self, other: &Landmark) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One of the four skeleton parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Body,
    Face,
    LeftHand,
    RightHand,
}

impl Part {
    pub const ALL: [Part; 4] = [Part::Body, Part::Face, Part::LeftHand, Part::RightHand];

    /// Slot range of the part inside the 137-landmark array.
    pub const fn range(self) -> Range<usize> {
        match self {
            Part::Body => 0..25,
            Part::Face => 25..95,
            Part::LeftHand => 95..116,
            Part::RightHand => 116..137,
        }
    }

    pub const fn len(self) -> usize {
        let r = self.range();
        r.end - r.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    landmarks: Vec<Landmark>,
}

impl PoseFrame {
    pub fn new(landmarks: Vec<Landmark>) -> Result<Self> {
        if landmarks.len() != NUM_LANDMARKS {
            return Err(Error::LengthMismatch {
                expected: NUM_LANDMARKS,
                found: landmarks.len(),
            });
        }
        Ok(PoseFrame { landmarks })
    }

    /// A frame where every landmark is missing.
    pub fn empty() -> Self {
        PoseFrame {
            landmarks: vec![Landmark::MISSING; NUM_LANDMARKS],
        }
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn landmarks_mut(&mut self) -> &mut [Landmark] {
        &mut self.landmarks
    }

    pub fn part(&self, part: Part) -> &[Landmark] {
        &self.landmarks[part.range()]
    }

    /// Copy of the frame with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> PoseFrame {
        let mut out = self.clone();
        out.scale_in_place(factor);
        out
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for lm in &mut self.landmarks {
            lm.x *= factor;
            lm.y *= factor;
        }
    }
}

/// Identifies one pose stream: the video it was cut from and the signer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SourceId {
    pub video: String,
    pub signer: String,
}

impl SourceId {
    /// Separator used when the id is embedded in a file name.
    pub const FILE_SEPARATOR: &'static str = "__";

    pub fn new(video: impl Into<String>, signer: impl Into<String>) -> Self {
        SourceId {
            video: video.into(),
            signer: signer.into(),
        }
    }

    /// Parses `video__signer` (file stems) or `video/signer`; anything else
    /// is taken as a video id with an empty signer.
    pub fn parse(s: &str) -> Self {
        if let Some((v, p)) = s.split_once(Self::FILE_SEPARATOR) {
            SourceId::new(v, p)
        } else if let Some((v, p)) = s.split_once('/') {
            SourceId::new(v, p)
        } else {
            SourceId::new(s, "")
        }
    }

    pub fn file_stem(&self) -> String {
        if self.signer.is_empty() {
            self.video.clone()
        } else {
            format!("{}{}{}", self.video, Self::FILE_SEPARATOR, self.signer)
        }
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.signer.is_empty() {
            f.write_str(&self.video)
        } else {
            write!(f, "{}/{}", self.video, self.signer)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frames: Vec<PoseFrame>,
    pub fps: f64,
    pub source: SourceId,
}

impl PoseSequence {
    pub fn new(frames: Vec<PoseFrame>, fps: f64, source: SourceId) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be > 0, got {fps}")));
        }
        if frames.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(PoseSequence {
            frames,
            fps,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> PoseSequence {
        PoseSequence {
            frames: self.frames.iter().map(|f| f.scaled(factor)).collect(),
            fps: self.fps,
            source: self.source.clone(),
        }
    }
}

/// Which landmarks feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointSubset {
    PoseAll,
    PoseBody,
    PoseHands,
    Bbox,
}

impl PointSubset {
    pub const ALL: [PointSubset; 4] = [
        PointSubset::PoseAll,
        PointSubset::PoseBody,
        PointSubset::PoseHands,
        PointSubset::Bbox,
    ];

    pub const fn dim(self) -> usize {
        match self {
            PointSubset::PoseAll => NUM_LANDMARKS,
            PointSubset::PoseBody => 25,
            PointSubset::PoseHands => 42,
            PointSubset::Bbox => 8,
        }
    }

    /// The subset whose dimensionality is `dim`; all four differ.
    pub fn from_dim(dim: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.dim() == dim)
    }

    pub const fn name(self) -> &'static str {
        match self {
            PointSubset::PoseAll => "pose-all",
            PointSubset::PoseBody => "pose-body",
            PointSubset::PoseHands => "pose-hands",
            PointSubset::Bbox => "bbox",
        }
    }

    pub(crate) const fn code(self) -> u8 {
        match self {
            PointSubset::PoseAll => 0,
            PointSubset::PoseBody => 1,
            PointSubset::PoseHands => 2,
            PointSubset::Bbox => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.code() == code)
    }

    /// Human readable name of every selected point, in feature order.
    pub fn point_names(self) -> Vec<String> {
        fn part_name(p: Part) -> &'static str {
            match p {
                Part::Body => "body",
                Part::Face => "face",
                Part::LeftHand => "left_hand",
                Part::RightHand => "right_hand",
            }
        }
        match self {
            PointSubset::PoseBody => body::NAMES.iter().map(|s| s.to_string()).collect(),
            PointSubset::PoseAll => {
                let mut names: Vec<String> = body::NAMES.iter().map(|s| s.to_string()).collect();
                for part in [Part::Face, Part::LeftHand, Part::RightHand] {
                    names.extend((0..part.len()).map(|i| format!("{}_{i}", part_name(part))));
                }
                names
            }
            PointSubset::PoseHands => [Part::LeftHand, Part::RightHand]
                .into_iter()
                .flat_map(|p| (0..p.len()).map(move |i| format!("{}_{i}", part_name(p))))
                .collect(),
            PointSubset::Bbox => BBOX_PART_ORDER
                .iter()
                .flat_map(|&p| ["min", "max"].map(|c| format!("{}_{c}", part_name(p))))
                .collect(),
        }
    }
}

impl fmt::Display for PointSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PointSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pose-all" | "all" => Ok(PointSubset::PoseAll),
            "pose-body" | "body" => Ok(PointSubset::PoseBody),
            "pose-hands" | "hands" => Ok(PointSubset::PoseHands),
            "bbox" => Ok(PointSubset::Bbox),
            other => Err(Error::InvalidArgument(format!(
                "unknown point subset {other:?} (expected pose-all, pose-body, pose-hands or bbox)"
            ))),
        }
    }
}

/// How coordinates are brought to shoulder-width units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizationMode {
    /// Divide by the mean shoulder distance of the whole sequence.
    #[default]
    PerSequence,
    /// Divide by the mean shoulder distance over the last `n` observations.
    TrailingWindow(usize),
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizationMode::PerSequence => f.write_str("per-sequence"),
            NormalizationMode::TrailingWindow(n) => write!(f, "trailing-{n}"),
        }
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        if s == "per-sequence" {
            return Ok(NormalizationMode::PerSequence);
        }
        if s == "trailing" {
            return Ok(NormalizationMode::TrailingWindow(DEFAULT_TRAILING_WINDOW));
        }
        if let Some(n) = s.strip_prefix("trailing-") {
            if let Ok(n) = n.parse::<usize>() {
                if n > 0 {
                    return Ok(NormalizationMode::TrailingWindow(n));
                }
            }
        }
        Err(Error::InvalidArgument(format!(
            "unknown normalization {s:?} (expected per-sequence, trailing or trailing-N)"
        )))
    }
}

/// Distance between the two shoulders, `None` if either is missing.
pub fn shoulder_distance(frame: &PoseFrame) -> Option<f64> {
    let lm = frame.landmarks();
    let left = &lm[body::LEFT_SHOULDER];
    let right = &lm[body::RIGHT_SHOULDER];
    (left.is_present() && right.is_present()).then(|| left.distance(right))
}

/// Mean shoulder distance over the frames where it is defined.
pub fn mean_shoulder_distance<'a>(frames: impl IntoIterator<Item = &'a PoseFrame>) -> Result<f64> {
    let (sum, n) = frames
        .into_iter()
        .filter_map(shoulder_distance)
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    if n == 0 {
        return Err(Error::DegeneratePose(
            "no frame has both shoulders present".into(),
        ));
    }
    let mean = sum / n as f64;
    if !(mean > 0.0) {
        return Err(Error::DegeneratePose("mean shoulder distance is 0".into()));
    }
    Ok(mean)
}

/// Divides every coordinate by the mean shoulder distance of the sequence.
pub fn normalize_sequence(seq: &PoseSequence) -> Result<PoseSequence> {
    let mean = mean_shoulder_distance(&seq.frames)?;
    Ok(PoseSequence {
        frames: seq.frames.iter().map(|f| divided(f, mean)).collect(),
        fps: seq.fps,
        source: seq.source.clone(),
    })
}

fn divided(frame: &PoseFrame, by: f64) -> PoseFrame {
    let mut out = frame.clone();
    for lm in out.landmarks_mut() {
        lm.x /= by;
        lm.y /= by;
    }
    out
}

/// Ring buffer of recently observed shoulder distances.
///
/// Frames without both shoulders are not recorded. Until the first
/// observation the divisor is 1.
#[derive(Debug, Clone)]
pub struct ShoulderWindow {
    capacity: usize,
    values: VecDeque<f64>,
}

impl ShoulderWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "trailing window must hold at least one frame");
        ShoulderWindow {
            capacity,
            values: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn observe(&mut self, frame: &PoseFrame) {
        if let Some(d) = shoulder_distance(frame) {
            if self.values.len() == self.capacity {
                self.values.pop_front();
            }
            self.values.push_back(d);
        }
    }

    /// Current divisor: the trailing mean, or 1 when nothing usable was seen.
    pub fn divisor(&self) -> f64 {
        if self.values.is_empty() {
            return 1.0;
        }
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        if mean > 0.0 {
            mean
        } else {
            1.0
        }
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }
}

/// Normalizes each frame by the trailing-window mean shoulder distance,
/// including the frame itself. Mirrors what the streaming engine applies.
pub fn normalize_trailing(seq: &PoseSequence, window: usize) -> PoseSequence {
    let mut ring = ShoulderWindow::new(window);
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            ring.observe(f);
            divided(f, ring.divisor())
        })
        .collect();
    PoseSequence {
        frames,
        fps: seq.fps,
        source: seq.source.clone(),
    }
}

pub fn normalize(seq: &PoseSequence, mode: NormalizationMode) -> Result<PoseSequence> {
    match mode {
        NormalizationMode::PerSequence => normalize_sequence(seq),
        NormalizationMode::TrailingWindow(n) => Ok(normalize_trailing(seq, n)),
    }
}

/// Bounding box of the present landmarks of `part`, as (min, max) corners.
/// Both corners are missing when no landmark of the part is present.
pub fn part_bbox(frame: &PoseFrame, part: Part) -> (Landmark, Landmark) {
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for lm in frame.part(part).iter().filter(|l| l.is_present()) {
        any = true;
        min = (min.0.min(lm.x), min.1.min(lm.y));
        max = (max.0.max(lm.x), max.1.max(lm.y));
    }
    if !any {
        return (Landmark::MISSING, Landmark::MISSING);
    }
    (Landmark::present(min.0, min.1), Landmark::present(max.0, max.1))
}

const BBOX_PART_ORDER: [Part; 4] = [Part::Face, Part::Body, Part::LeftHand, Part::RightHand];

pub fn select_points(frame: &PoseFrame, subset: PointSubset) -> Vec<Landmark> {
    let mut out = Vec::with_capacity(subset.dim());
    select_points_into(frame, subset, &mut out);
    out
}

/// Allocation-free variant of [`select_points`]; `out` is cleared first.
pub fn select_points_into(frame: &PoseFrame, subset: PointSubset, out: &mut Vec<Landmark>) {
    out.clear();
    let lm = frame.landmarks();
    match subset {
        PointSubset::PoseAll => out.extend_from_slice(lm),
        PointSubset::PoseBody => out.extend_from_slice(&lm[Part::Body.range()]),
        PointSubset::PoseHands => {
            out.extend_from_slice(&lm[Part::LeftHand.range()]);
            out.extend_from_slice(&lm[Part::RightHand.range()]);
        }
        PointSubset::Bbox => {
            for part in BBOX_PART_ORDER {
                let (lo, hi) = part_bbox(frame, part);
                out.push(lo);
                out.push(hi);
            }
        }
    }
}

/// Per-point flow norms between two selections of the same subset.
pub fn flow_step(prev: &[Landmark], cur: &[Landmark], fps: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; cur.len()];
    flow_step_into(prev, cur, fps, &mut out)?;
    Ok(out)
}

pub fn flow_step_into(prev: &[Landmark], cur: &[Landmark], fps: f64, out: &mut [f64]) -> Result<()> {
    if prev.len() != cur.len() {
        return Err(Error::LengthMismatch {
            expected: prev.len(),
            found: cur.len(),
        });
    }
    if out.len() != cur.len() {
        return Err(Error::LengthMismatch {
            expected: cur.len(),
            found: out.len(),
        });
    }
    for ((o, a), b) in out.iter_mut().zip(prev).zip(cur) {
        *o = if a.is_present() && b.is_present() {
            a.distance(b) * fps
        } else {
            0.0
        };
    }
    Ok(())
}

/// T x D flow-norm matrix of an (already normalized) sequence. Row 0 is zero.
pub fn extract_features(seq: &PoseSequence, subset: PointSubset) -> Result<Array2<f64>> {
    let dim = subset.dim();
    let mut out = Array2::zeros((seq.len(), dim));
    let mut prev = Vec::with_capacity(dim);
    let mut cur = Vec::with_capacity(dim);
    for (t, frame) in seq.frames.iter().enumerate() {
        select_points_into(frame, subset, &mut cur);
        if t > 0 {
            let mut row = out.row_mut(t);
            let row = row
                .as_slice_mut()
                .expect("rows of a standard-layout matrix are contiguous");
            flow_step_into(&prev, &cur, seq.fps, row)?;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(out)
}

/// Normalization followed by feature extraction.
pub fn sequence_features(
    seq: &PoseSequence,
    subset: PointSubset,
    mode: NormalizationMode,
) -> Result<Array2<f64>> {
    extract_features(&normalize(seq, mode)?, subset)
}
