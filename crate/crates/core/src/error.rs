use std::path::PathBuf;

use thiserror::Error;

use crate::data::Label;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}, line {line}: {msg}")]
    Parse {
        source_name: String,
        line: u64,
        msg: String,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("domain is unlabeled")]
    Unlabeled,

    #[error("label {0} is outside the valid class range")]
    InvalidLabel(Label),

    #[error("the domains share no class")]
    NoCommonClass,

    #[error("class {0} is absent from one side of the pair")]
    ClassAbsent(Label),

    #[error("median-heuristic bandwidth is zero: all points are identical")]
    DegenerateBandwidth,

    #[error("recording has {len} samples, shorter than one window of {window}")]
    RecordingTooShort { len: usize, window: usize },

    #[error("window of {0} samples is too short (minimum 8)")]
    WindowTooShort(usize),

    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },

    #[error("linear max-margin classifier needs at least two classes")]
    SingleClass,

    #[error("generalized eigenproblem is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("every candidate source shares no class with its pseudo-labeled target")]
    NoFiniteSource,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
