use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// No frame carries both shoulders, or their mean distance is zero.
    #[error("degenerate pose sequence: {0}")]
    DegeneratePose(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input")]
    EmptyInput,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("corrupt model file at byte {offset}: {reason}")]
    CorruptModelFile { offset: usize, reason: String },

    #[error("corrupt feature file at byte {offset}: {reason}")]
    CorruptFeatureFile { offset: usize, reason: String },

    #[error("{}", parse_message(.frame, .reason))]
    ParseError { frame: Option<usize>, reason: String },

    #[error("frame rate missing: no fps in pose header and none supplied")]
    MissingFps,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_message(frame: &Option<usize>, reason: &str) -> String {
    match frame {
        Some(i) => format!("parse error at frame {i}: {reason}"),
        None => format!("parse error: {reason}"),
    }
}

impl Error {
    pub(crate) fn parse(frame: impl Into<Option<usize>>, reason: impl Into<String>) -> Self {
        Error::ParseError {
            frame: frame.into(),
            reason: reason.into(),
        }
    }
}
