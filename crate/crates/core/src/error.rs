use thiserror::Error;

/// Errors produced by the covmax library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("degenerate asymptotic variance {value} for pair {index}")]
    DegenerateVariance { index: usize, value: f64 },

    #[error("deviation result has not been standardized")]
    MissingStandardization,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sample too short: need at least {required} observations, got {found}")]
    SampleTooShort { required: usize, found: usize },

    #[error("no valid fixed point: {0}")]
    NoFixedPoint(String),

    #[error("decay certificate failed: {0}")]
    CertificateFailure(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
