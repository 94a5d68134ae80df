//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MisoError>;

#[derive(Debug, Error)]
pub enum MisoError {
    /// Malformed input: wrong dimensions, out-of-range indices, non-positive costs...
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A covariance matrix could not be factorized even after jitter.
    #[error("numerical conditioning failure: {0}")]
    Conditioning(String),

    /// Configuration file problems, always naming the offending field or path.
    #[error("config error: {0}")]
    Config(String),

    /// An information source returned something unusable.
    #[error("source {source_index} failed at {x:?}: {reason}")]
    SourceFailure {
        source_index: usize,
        x: Vec<f64>,
        reason: String,
    },

    #[error("expression parse error at position {pos}: {msg}")]
    Expression { pos: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MisoError::InvalidInput(msg.into()))
}
