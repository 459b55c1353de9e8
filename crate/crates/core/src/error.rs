use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{count} zero signature entries exceed the enumeration limit of {limit}")]
    TooManyZeros { count: usize, limit: usize },
    #[error("{count} product cells exceed the limit of {limit}")]
    TooManyCells { count: usize, limit: usize },
    #[error("minimum-norm-point did not converge after {cycles} major cycles (best norm {best_norm:e})")]
    NonConvergence { cycles: usize, best_norm: f64 },
    #[error("found {found} of {wanted} in-cell samples after {attempts} attempts")]
    SamplingFailed {
        found: usize,
        wanted: usize,
        attempts: usize,
    },
    #[error("enumeration budget exceeded: {size} assignments > {limit}")]
    BudgetExceeded { size: f64, limit: f64 },
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("loss diverged to {loss:e} at iteration {iteration}")]
    Diverged { iteration: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
