//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors raised by the core pipeline operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input violated an operation precondition.
    InvalidInput(String),
    /// A degenerate distribution (constant series, zero variance, ...).
    Degenerate(String),
    /// A required date is missing from a series.
    MissingDate(String),
    /// Two series that must share a date axis do not.
    Misaligned(String),
    /// The design matrix of a regression is rank deficient.
    SingularDesign(String),
    /// An iterative solver exhausted its iteration budget.
    NoConvergence(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::MissingDate(msg) => write!(f, "missing date: {msg}"),
            Error::Misaligned(msg) => write!(f, "misaligned series: {msg}"),
            Error::SingularDesign(msg) => write!(f, "singular design matrix: {msg}"),
            Error::NoConvergence(msg) => write!(f, "no convergence: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
