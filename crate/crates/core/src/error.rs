use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance infeasible: {requested} edges requested but only {available} cross-class pairs exist")]
    InstanceInfeasible { requested: usize, available: usize },

    #[error("problem too large for exhaustive search: {size} > {limit}")]
    SizeTooLarge { size: usize, limit: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no embedding found after {tries} tries")]
    EmbeddingNotFound { tries: usize },

    #[error("coefficient {value} outside range [{min}, {max}]")]
    RangeViolation { value: f64, min: f64, max: f64 },

    #[error("problem hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
