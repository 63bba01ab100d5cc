use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the solver library and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid reference function: {0}")]
    InvalidReference(String),

    #[error("block {block} is invalid: {reason}")]
    InvalidBlock { block: usize, reason: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line search failed on block {block} after {backtracks} backtracks (initial step {alpha0:e})")]
    LineSearchFailure {
        block: usize,
        backtracks: usize,
        alpha0: f64,
    },

    #[error("invariant `{invariant}` violated at step {step} (block {block:?}): lhs {lhs:e} > rhs {rhs:e}")]
    InvariantViolation {
        invariant: &'static str,
        step: usize,
        block: Option<usize>,
        lhs: f64,
        rhs: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: negative entry {value} at ({row}, {col})")]
    NegativeEntry {
        path: PathBuf,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
