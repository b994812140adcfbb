//! Real-time sign language detection from human pose landmarks.
//!
//! The pipeline turns a stream of 137-point pose frames into per-landmark
//! optical-flow norms (displacement between consecutive frames times the
//! frame rate), and classifies every frame as signing / not-signing with a
//! small uni-directional LSTM or a fixed-context linear baseline.
//!
//! - [`pose_features`]: pose data model, shoulder normalization, point
//!   subsets, flow features.
//! - [`models`]: LSTM and linear classifiers plus the `SGNS` model file.
//! - [`training`]: NLL loss, BPTT, Adam, early stopping, corpus split.
//! - [`evaluation`]: frame accuracy, span statistics and the eight-way
//!   span error taxonomy.
//! - [`streaming`]: the per-frame engine and its latency benchmark.
//! - [`dataio`]: pose JSON ingestion, gloss labels, `SGNF` feature files
//!   and the synthetic corpus generator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod pose_features;
pub mod streaming;
pub mod training;

pub use dataio::{GlossSegments, LabeledSequence, SynthConfig};
pub use error::{Error, Result};
pub use evaluation::{ErrorEvent, ErrorType, Span};
pub use models::{Classifier, Detector, LinearClassifier, LstmClassifier, LstmState, Prediction};
pub use pose_features::{
    Landmark, NormalizationMode, Part, PointSubset, PoseFrame, PoseSequence, SourceId,
    NUM_LANDMARKS,
};
pub use streaming::{EngineConfig, EngineSession, StepOutput};
pub use training::TrainConfig;
