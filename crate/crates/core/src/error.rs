use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance not PD")]
    CovarianceNotPd,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("degenerate weights")]
    DegenerateWeights,
    #[error("component weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("delta must be non-negative, got {0}")]
    NegativeDelta(f64),
    #[error("vector is not unit norm (norm {0})")]
    NonUnitVector(f64),
    #[error("zero vector")]
    ZeroVector,
    #[error("zero matrix")]
    ZeroMatrix,
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Errors caused by user-supplied configuration or input files rather than
    /// by numerical breakdown during a fit.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dataset(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::NegativeDelta(_)
                | Error::LengthMismatch { .. }
                | Error::DimensionMismatch { .. }
        )
    }
}
