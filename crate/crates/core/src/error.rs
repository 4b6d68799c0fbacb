use thiserror::Error;

/// Errors raised by model construction, simulation and bound evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("zero-probability event: {0}")]
    ZeroProbability(String),
    #[error("no coalescence within depth {max_depth}")]
    NoCoalescence { max_depth: usize },
    #[error("series is not summable: {0}")]
    NotSummable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("alphabet too large: {size} exceeds limit {limit}")]
    AlphabetTooLarge { size: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
