//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A text payload could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Input violated a documented precondition or invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor or matrix shapes do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// No qualifying sync spike window was found.
    #[error("no spike found")]
    NoSpikeFound,

    /// A model or dataset container failed structural validation.
    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
