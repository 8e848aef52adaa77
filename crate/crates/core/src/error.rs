use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("charge mismatch: {0}")]
    ChargeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all singular values are below the truncation cutoff")]
    AllBelowCutoff,
    #[error("eigensolver did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("canonical-form residual {0:e} exceeds threshold after re-canonicalization")]
    CanonicalForm(f64),
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error("imaginary-time cooling did not converge: {0}")]
    CoolingNotConverged(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("scaling collapse impossible: {0}")]
    FitImpossible(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
