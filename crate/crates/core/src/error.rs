use thiserror::Error;

use crate::linalg::MAX_DIM;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} exceeds the supported maximum of {MAX_DIM}")]
    DimensionTooLarge(usize),

    #[error("matrix is not Hermitian (relative deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix has a non-finite entry")]
    NonFinite,

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("state has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("parameter {name} = {value} is outside {range}")]
    OutOfRange {
        name: String,
        value: f64,
        range: String,
    },

    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),

    #[error("probe Gram matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn out_of_range(name: &str, value: f64, range: &str) -> Self {
        Error::OutOfRange {
            name: name.to_string(),
            value,
            range: range.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
