//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by circuit construction, synthesis, and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("matrix is not unitary: max deviation {deviation:.3e} exceeds tolerance {tolerance:.1e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("unsupported dimension {0}: mutually unbiased bases require d = 2 or an odd prime")]
    UnsupportedDimension(usize),

    #[error("fidelity undefined: {0}")]
    UndefinedFidelity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("underdetermined problem: {0}")]
    Underdetermined(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("bad matrix file: {0}")]
    MatrixFormat(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
