use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty support: every softmax entry is -inf")]
    EmptySupport,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("spectral norm did not converge after {iterations} iterations (relative residual {residual:e})")]
    SpectralNotConverged { iterations: usize, residual: f64 },
    #[error("basis infeasible at (T'={count}, d={dim}, delta={delta})")]
    BasisInfeasible { count: usize, dim: usize, delta: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("rejection budget exhausted after {0} resamples")]
    RejectionBudget(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
