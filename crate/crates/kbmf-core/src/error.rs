//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by kernel construction, inference, prediction, and evaluation.
#[derive(Debug, Error)]
pub enum KbmfError {
    /// Matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data violates a contract (non-finite values, bad labels, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// A numerical operation failed (factorization, non-finite result).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An evaluation cell could not be scored (e.g. single-class fold).
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A configuration or manifest problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KbmfError>;
