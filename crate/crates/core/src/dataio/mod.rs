//! Ingestion and storage: pose exports, gloss segments, `SGNF` feature
//! files and the synthetic corpus generator.

mod features_file;
mod gloss;
mod pose_json;
mod synth;

use std::path::Path;

use ndarray::Array2;

pub use features_file::{
    load_feature_dir, load_features, read_features, save_features, write_features, FeatureFile,
    FEATURE_FORMAT_VERSION, FEATURE_MAGIC,
};
pub use gloss::{labels_from_gloss, GlossSegments};
pub use pose_json::{load_pose_file, parse_pose_json, save_pose_file, PoseFileHeader};
pub use synth::{synth_corpus, SynthConfig, SynthSequence};

use crate::error::{Error, Result};
use crate::pose_features::{sequence_features, NormalizationMode, PointSubset, PoseSequence, SourceId};

/// Feature matrix with per-frame gold labels: the unit of training and
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    /// T x D
    pub features: Array2<f64>,
    /// T values in {0, 1}
    pub labels: Vec<u8>,
    pub fps: f64,
    pub source: SourceId,
}

impl LabeledSequence {
    pub fn new(features: Array2<f64>, labels: Vec<u8>, fps: f64, source: SourceId) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
        }
        if !(fps > 0.0) {
            return Err(Error::InvalidArgument(format!("fps must be > 0, got {fps}")));
        }
        Ok(LabeledSequence {
            features,
            labels,
            fps,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Normalizes and extracts features from a pose sequence and attaches
    /// gold labels derived from its gloss segments.
    pub fn from_poses(
        poses: &PoseSequence,
        gloss: &GlossSegments,
        subset: PointSubset,
        normalization: NormalizationMode,
    ) -> Result<Self> {
        let features = sequence_features(poses, subset, normalization)?;
        let labels = labels_from_gloss(gloss, poses.len(), poses.fps);
        LabeledSequence::new(features, labels, poses.fps, poses.source.clone())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_features(path, self.features.view(), &self.labels, self.fps)
    }

    /// Loads an `SGNF` file; the source id comes from the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = load_features(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        LabeledSequence::new(file.features, file.labels, file.fps, SourceId::parse(&stem))
    }
}
