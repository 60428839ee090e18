use thiserror::Error;

/// Errors raised by the lattice, finite element, coupling and harness layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("interaction offset {rho} is not in the interaction range")]
    RangeViolation { rho: i64 },

    #[error("potential evaluated outside its domain at r = {r}")]
    PotentialDomain { r: f64 },

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderOutOfRange { order: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("matrix is singular (zero pivot at row {row})")]
    Singular { row: usize },

    #[error("matrix is not positive definite (failed at row {row})")]
    NotPositiveDefinite { row: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        /// Best iterate reached, in the solver's free coordinates.
        best: Vec<f64>,
    },

    #[error("line search failed at iteration {iteration} (residual {residual:e})")]
    LineSearch { iteration: usize, residual: f64, best: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
