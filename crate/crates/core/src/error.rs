use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: entries ({row},{col}) and ({col},{row}) differ by {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("operator is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("block length N = {n} exceeds the cap of {cap} for {what}")]
    CapExceeded { what: &'static str, n: usize, cap: usize },

    #[error("prefix has zero probability under the source model")]
    ZeroProbabilityPrefix,

    #[error("prefix coverage incomplete: probabilities sum to {0}")]
    IncompletePrefixCoverage(f64),

    #[error("code construction infeasible: {0}")]
    Infeasible(String),

    #[error("{0} is not supported")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
