//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The Legendre transform could not be inverted near the requested state.
    #[error("singular Legendre transform: {0}")]
    SingularLegendre(String),

    /// A user-supplied gradient disagrees with its finite-difference check.
    #[error("gradient validation failed for `{function}`: max relative error {max_rel_error:.3e} exceeds {tolerance:.1e}")]
    GradientValidation {
        function: String,
        max_rel_error: f64,
        tolerance: f64,
    },

    /// An implicit step did not converge within the iteration caps.
    #[error("integrator step {step} did not converge: residual {residual:.3e} after {iterations} iterations")]
    IntegratorStep {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Error {
        Error::InvalidArgument(msg.into())
    }
}
