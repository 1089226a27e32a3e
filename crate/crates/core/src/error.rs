use thiserror::Error;

/// Errors raised by the simulation, extrapolation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("nodes {first} and {second} coincide (tau = {tau:e})")]
    DuplicateNodes { first: usize, second: usize, tau: f64 },

    #[error("quantization collision: nodes {first} and {second} share step count {steps}")]
    QuantizationCollision { first: usize, second: usize, steps: u64 },

    #[error("least-squares system is ill-conditioned (estimated condition {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("overflow while building table at {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
