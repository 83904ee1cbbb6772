//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or configuration parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The emitter coupling does not satisfy the in-gap condition |g| < 2|delta|.
    #[error("coupling g = {g} outside the band gap: need |g| < 2|delta| = {gap}")]
    OutOfGap { g: f64, gap: f64 },

    /// The bound-state pair is undefined at g = 0.
    #[error("bound-state pair undefined at g = 0")]
    DegenerateCoupling,

    /// The spectrum does not contain the expected number of in-gap states.
    #[error("expected {expected} in-gap states, found {found}")]
    TopologyMismatch { expected: usize, found: usize },

    /// Relative error against a zero true value is undefined.
    #[error("squared relative error undefined for x_true = 0")]
    UndefinedRelativeError,

    /// An eigensolve or time integration failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Command-line or config-file validation failure.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::OutOfGap { .. }
            | Error::DegenerateCoupling
            | Error::TopologyMismatch { .. }
            | Error::UndefinedRelativeError
            | Error::Config(_) => ErrorClass::Validation,
            Error::Numerical(_) | Error::Io(_) => ErrorClass::Numerical,
        }
    }
}
