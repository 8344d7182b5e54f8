use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteinError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular")]
    Singular,

    #[error("active design columns are rank deficient (rank {rank} < {support} active columns)")]
    RankDeficient { rank: usize, support: usize },

    #[error("numeric fault: {0}")]
    Numeric(String),

    #[error("singular value decomposition failed")]
    SvdFailure,

    #[error("cross-trace information missing: {0}")]
    MissingCrossTrace(String),

    #[error("ill-posed adjustment: |z0|^2 - nu_hat = {0} is not positive")]
    IllPosedAdjustment(f64),

    #[error("map evaluation failed at replication {index}: {message}")]
    MapFailure { index: usize, message: String },
}

pub type Result<T> = std::result::Result<T, SteinError>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(SteinError::InvalidArgument(msg()))
    }
}
