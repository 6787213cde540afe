use thiserror::Error;

/// Errors raised by model construction, estimation, and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigenvalues must be strictly decreasing and positive: {0}")]
    EigenvaluesNotDistinct(String),

    #[error("stationarity condition violated: {0}")]
    NonStationary(String),

    #[error("operator is not self-adjoint in the weighted inner product: {0}")]
    NotSelfAdjoint(String),

    #[error("no valid truncation level: {0}")]
    NoValidTruncation(String),

    #[error("truncation level {k} exceeds numerical rank {rank}")]
    TruncationBeyondRank { k: usize, rank: usize },

    #[error("aligned projection requested but no alignment data is present")]
    AlignmentMissing,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
