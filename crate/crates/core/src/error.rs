//! Error type shared by all modules.

use std::fmt;

/// Classified failure modes. The variants map onto the CLI exit-code
/// contract: `Domain`/`Validation` are caller mistakes, `CostGuard` and
/// `Numerical` are resource or convergence failures.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument left the mathematical domain of an operation
    /// (overlap outside [-1, 1], b at or below the cascade pole, ...).
    Domain(String),
    /// A structured input violates its invariants (non-monotone sequences,
    /// wrong lengths, out-of-range coefficients, ...).
    Validation(String),
    /// A configured guard refused the requested problem size.
    CostGuard(String),
    /// An iterative method failed to bracket or converge, or a matrix
    /// factorization failed.
    Numerical(String),
    /// Not enough data to form the requested estimate (replicas, chains).
    Insufficient(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::Validation(s) => write!(f, "validation error: {s}"),
            Error::CostGuard(s) => write!(f, "cost guard: {s}"),
            Error::Numerical(s) => write!(f, "numerical error: {s}"),
            Error::Insufficient(s) => write!(f, "insufficient data: {s}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
