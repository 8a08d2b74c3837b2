use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,

    #[error("invalid window length {window} for a series of {len} points (need 2 <= L < n/2)")]
    InvalidWindowLength { window: usize, len: usize },

    #[error("need at least {needed} points of history, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("reference set needs at least 2 vectors, got {0}")]
    DegenerateReference(usize),

    #[error("covariance is singular; use a positive shrinkage")]
    SingularCovariance,

    #[error("shrinkage must lie in [0, 1], got {0}")]
    InvalidShrinkage(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("k = {k} must satisfy 1 <= k < {reference_size} (reference size)")]
    KTooLarge { k: usize, reference_size: usize },

    #[error("reference index {index} out of range for {len} vectors")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("LoOP lambda must be positive, got {0}")]
    InvalidLambda(f64),

    #[error(
        "matrix with {columns} columns cannot be split into T = {train} and C = {calibration}"
    )]
    ShapeMismatch {
        columns: usize,
        train: usize,
        calibration: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("timestamps not strictly increasing at line {line}")]
    NonMonotoneTimestamps { line: usize },

    #[error("missing value at line {line}")]
    MissingValue { line: usize },

    #[error("overlapping anomaly windows in {file}")]
    OverlappingWindows { file: String },

    #[error("detections are not in strictly increasing time order at position {0}")]
    UnorderedDetections(usize),

    #[error("null and perfect baselines coincide; the corpus has no scoreable windows")]
    DegenerateBaseline,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
