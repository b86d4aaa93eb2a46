//! Error type shared by every module in the crate.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidInput(String),
    /// Vector/matrix sizes do not agree with the wheel count or node count.
    DimensionMismatch { expected: usize, actual: usize },
    /// The adaptive integrator underflowed its step size at time `t`.
    IntegrationFailure { t: f64 },
    /// A matrix that must be positive semidefinite was not (within tolerance).
    FactorizationFailure { min_eigenvalue: f64 },
    /// Conic problem assembly found inconsistent dimensions or layouts.
    Construction(String),
    /// A solver backend failed outright (not a status, a hard error).
    Solver(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Error::IntegrationFailure { t } => {
                write!(f, "integration failed: step size underflow at t = {t}")
            }
            Error::FactorizationFailure { min_eigenvalue } => write!(
                f,
                "factorization failed: matrix not PSD (min eigenvalue {min_eigenvalue:e})"
            ),
            Error::Construction(msg) => write!(f, "problem construction: {msg}"),
            Error::Solver(msg) => write!(f, "solver backend: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
