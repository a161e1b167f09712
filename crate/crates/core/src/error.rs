use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A matrix failed the density-matrix or basis invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An iterative solver hit its iteration cap. Carries the residuals at
    /// the last iterate so callers can log them.
    #[error("{solver} did not converge after {iterations} iterations (primal {primal:.3e}, dual {dual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("scheme exhausted: only {available} distinct bases are available")]
    SchemeExhausted { available: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TomoError>;
