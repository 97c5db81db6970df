//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (bad rows, unknown labels, inconsistent files).
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A request that cannot be honored as stated (bad arguments, missing data).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Numerically degenerate or infeasible problem instance
    /// (zero-probability supports, undefined normalizations, failed samplers).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Process exit code convention: 1 for validation problems, 2 for
    /// numerical/degenerate-input problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
