//! Error type shared by all solvers and builders in this crate.

use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Vector/operator dimensions do not agree.
    DimensionMismatch { expected: usize, got: usize, context: &'static str },
    /// A construction precondition failed (bad size, non-finite entry, ...).
    InvalidInput(String),
    /// An operator row is identically zero, so its dual coordinate is degenerate.
    DegenerateRow(usize),
    /// An iterative solver hit its iteration cap before reaching tolerance.
    SolverStall { what: &'static str, achieved: f64, required: f64 },
    /// The operation is not defined for this functional structure.
    Unsupported { what: &'static str, tag: &'static str },
    /// A subgradient certificate is missing or violates the dual box.
    InvalidCertificate(String),
    /// The operation needs a vector that is not identically zero.
    ZeroVector(&'static str),
    /// The operation needs an extinct trajectory.
    NotExtinct,
    /// Trajectory evaluation past the computed horizon of a non-extinct run.
    BeyondHorizon { t: f64, horizon: f64 },
    /// f - f_bar could not be represented as A^T q within tolerance.
    NotInRange { residual: f64, tol: f64 },
    /// A synthesis precondition failed: component i is not an eigenvector.
    NotAnEigenvector { index: usize, defect: f64 },
    /// A synthesis precondition failed: components i and j are not orthogonal.
    NotOrthogonal { i: usize, j: usize, inner: f64 },
    /// A synthesis precondition failed: the suffix sum starting at j leaves the dual ball.
    SuffixNotInDualBall { j: usize, residual: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got, context } => {
                write!(f, "dimension mismatch in {context}: expected {expected}, got {got}")
            }
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DegenerateRow(i) => write!(f, "operator row {i} is identically zero"),
            Error::SolverStall { what, achieved, required } => {
                write!(f, "{what} did not converge: reached {achieved:.3e}, required {required:.3e}")
            }
            Error::Unsupported { what, tag } => write!(f, "{what} is not defined for the {tag} functional"),
            Error::InvalidCertificate(msg) => write!(f, "invalid certificate: {msg}"),
            Error::ZeroVector(what) => write!(f, "{what} requires a nonzero vector"),
            Error::NotExtinct => write!(f, "trajectory is not extinct"),
            Error::BeyondHorizon { t, horizon } => {
                write!(f, "t = {t} is past the computed horizon {horizon} of a non-extinct trajectory")
            }
            Error::NotInRange { residual, tol } => {
                write!(f, "datum is not in range(A^T) within tolerance: residual {residual:.3e} > {tol:.3e}")
            }
            Error::NotAnEigenvector { index, defect } => {
                write!(f, "component {index} is not an eigenvector (defect {defect:.3e})")
            }
            Error::NotOrthogonal { i, j, inner } => {
                write!(f, "components {i} and {j} are not orthogonal (<p_i,p_j> = {inner:.3e})")
            }
            Error::SuffixNotInDualBall { j, residual } => {
                write!(f, "suffix sum starting at component {j} leaves the dual ball (residual {residual:.3e})")
            }
        }
    }
}

impl std::error::Error for Error {}
