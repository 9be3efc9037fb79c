//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("count mismatch in {context}: {left} vs {right}")]
    CountMismatch {
        context: String,
        left: usize,
        right: usize,
    },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("missing {context}: {id}")]
    MissingId { context: String, id: String },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error(
        "singular normal equations: smallest singular value {s_min:.3e} \
         against largest {s_max:.3e}"
    )]
    SingularNormalEquations { s_min: f64, s_max: f64 },

    #[error(
        "singular decoding system: reciprocal condition number {rcond:.3e} \
         (condition number {condition:.3e}) below tolerance {tolerance:.1e}"
    )]
    SingularDecoding {
        rcond: f64,
        condition: f64,
        tolerance: f64,
    },

    #[error("enumeration too large: {total} tuples exceeds {limit}; use the Monte-Carlo variant")]
    EnumerationTooLarge { total: u128, limit: u128 },

    #[error("{path}: {message} at byte offset {offset}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
