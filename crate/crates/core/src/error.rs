use thiserror::Error;

/// Errors raised by state construction, conversion synthesis and search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid dimensions {0}x{1}")]
    InvalidDims(usize, usize),

    #[error("zero vector has no associated state")]
    ZeroState,

    #[error("state norm squared {0} exceeds 1")]
    NormTooLarge(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("invalid Schmidt vector: {0}")]
    InvalidSchmidtVector(String),

    #[error("target does not majorize source: prefix sum {index} falls short by {deficit:e}")]
    NotMajorized { index: usize, deficit: f64 },

    #[error("probability {0} outside its allowed range")]
    InvalidProbability(f64),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("ensemble size {size} is smaller than rank {rank}")]
    EnsembleTooSmall { size: usize, rank: usize },

    #[error("mixer is not an isometry (deviation {0:e})")]
    NonIsometricMixer(f64),

    #[error("Kraus operators are not complete (deviation {0:e})")]
    IncompleteKraus(f64),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("ensemble weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("precursor Schmidt vector differs from the ensemble average (residuals {0:?})")]
    AverageMismatch(Vec<f64>),

    #[error("ensemble is not reachable from the source (prefix {index} short by {deficit:e})")]
    NotReachable { index: usize, deficit: f64 },

    #[error("operation requires two-qubit dimensions, got {0}x{1}")]
    NotTwoQubit(usize, usize),

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
