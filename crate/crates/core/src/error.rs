use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the numerical routines of the laboratory.
///
/// Every variant carries enough context to be logged into an experiment
/// report without further lookups.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum LabError {
    #[error("trigonometric polynomial is identically zero")]
    IdenticallyZero,

    #[error("polynomial root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Diophantine condition fails at n = {n}: ||n omega|| = {distance:e} < required {required:e}")]
    DiophantineViolation { n: u64, distance: f64, required: f64 },

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("matrix determinant vanishes in floating point")]
    SingularMatrix,

    #[error("Cramer denominator determinant is exactly zero")]
    SingularDenominator,

    #[error("Birkhoff sum is -inf: orbit point {index} is an exact zero")]
    MinusInfinity { index: i64 },

    #[error("contour passes through a zero after {attempts} radius nudges")]
    ContourThroughZero { attempts: usize },

    #[error("winding-number subdivision exceeded {nodes} nodes")]
    WindingNonConvergence { nodes: usize },

    #[error("sampled function value is not finite at {re} + {im}i")]
    SingularSample { re: f64, im: f64 },

    #[error("no adjusted integer within {radius} of {center}")]
    NoAdjustedInteger { center: i64, radius: i64 },

    #[error("eta = {eta:e} outside the admissible range [{lo:e}, {hi:e}]")]
    EtaOutOfRange { eta: f64, lo: f64, hi: f64 },

    #[error("only {usable} grid points carry signal above noise (need {needed})")]
    InsufficientSignal { usable: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
