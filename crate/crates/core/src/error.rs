use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidArgument(String),
    /// A user function returned a non-finite value.
    Evaluation { what: String, point: [f64; 2] },
    InvalidData(String),
    UnsupportedDegree { requested: usize, max: usize },
    /// LU factorization found no usable pivot at the given elimination step.
    Singular { step: usize, column: usize },
    Divergence { history: Vec<f64> },
    /// Iteration cap reached above tolerance.
    NotConverged { iterations: usize, residual: f64 },
    UnknownProblem(String),
    Parse(String),
    RateUnavailable { converged_rows: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Evaluation { what, point } => write!(
                f,
                "{what} is not finite at ({}, {})",
                point[0], point[1]
            ),
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::UnsupportedDegree { requested, max } => write!(
                f,
                "quadrature exactness {requested} not supported (max {max})"
            ),
            Error::Singular { step, column } => write!(
                f,
                "matrix is singular to working precision at elimination step {step} (column {column})"
            ),
            Error::Divergence { history } => write!(
                f,
                "newton iteration diverged after {} iterations (last residual {:e})",
                history.len().saturating_sub(1),
                history.last().copied().unwrap_or(f64::NAN)
            ),
            Error::NotConverged { iterations, residual } => write!(
                f,
                "newton iteration stopped after {iterations} iterations with residual {residual:e}"
            ),
            Error::UnknownProblem(label) => write!(f, "unknown problem label `{label}`"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::RateUnavailable { converged_rows } => write!(
                f,
                "convergence rate needs at least 2 converged levels, got {converged_rows}"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
