use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outside the operator domain: {0}")]
    Domain(String),

    #[error("non-finite integrand value {value} at {point}")]
    NonFinite { point: String, value: f64 },

    #[error("quadrature did not converge (residual estimate {residual:e})")]
    NonConvergence { residual: f64 },

    #[error("norm infinite: {0}")]
    InfiniteNorm(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("zero norm: quotient undefined")]
    ZeroNorm,

    #[error("unbounded operator: {0}")]
    Unbounded(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
