//! Error type shared by every module of the crate.

use alloc::string::String;
use core::fmt;

/// Failure modes of the design and simulation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument had the wrong dimension.
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A computation produced a non-finite value.
    NonFinite { what: &'static str, index: usize },
    /// Invalid configuration or parameters.
    Config(String),
    /// The plant does not admit the requested design (e.g. uncontrollable).
    Design(String),
    /// An iterative solver failed to converge; carries the final residual.
    Convergence { what: &'static str, residual: f64 },
    /// The mass-matrix determinant vanished.
    SingularMass { determinant: f64 },
    /// A simulated state escaped the admissible region.
    Divergence {
        time: f64,
        state_index: usize,
        value: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected dimension {expected}, got {got}"),
            Error::NonFinite { what, index } => {
                write!(f, "{what}: non-finite value in component {index}")
            }
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Design(msg) => write!(f, "design error: {msg}"),
            Error::Convergence { what, residual } => {
                write!(f, "{what} did not converge (residual {residual:.3e})")
            }
            Error::SingularMass { determinant } => {
                write!(f, "mass matrix is singular (det = {determinant:.3e})")
            }
            Error::Divergence {
                time,
                state_index,
                value,
            } => write!(
                f,
                "state diverged at t = {time:.6} s (x[{state_index}] = {value:.3e})"
            ),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// True for errors that indicate an invalid design request rather than
    /// a numerical breakdown.
    pub fn is_design(&self) -> bool {
        matches!(self, Error::Design(_))
    }
}
