use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point {index} is isolated: the neighbor cutoff removed every transition away from it")]
    IsolatedPoint { index: usize },

    #[error("power iteration did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("path enumeration would visit {paths} sequences, above the limit of {limit}")]
    EnumerationBound { paths: f64, limit: f64 },

    #[error("unstable time step: stability factor {factor:e} exceeds {limit:e}")]
    Unstable { factor: f64, limit: f64 },

    #[error("degenerate field: {0}")]
    Degenerate(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("indeterminate classification: every labeled point has zero similarity to the query")]
    Indeterminate,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}
