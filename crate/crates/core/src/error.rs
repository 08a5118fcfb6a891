use thiserror::Error;

/// Errors raised by the signature, winding and SLE routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SigError {
    /// Operands disagree on dimension or truncation level.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A word or level exceeds what the tensor holds.
    #[error("range error: {0}")]
    Range(String),

    /// Triangular Lyndon extraction left a residual above tolerance.
    #[error("not a Lie element: residual norm {residual:e} exceeds tolerance {tolerance:e}")]
    NotLie { residual: f64, tolerance: f64 },

    #[error("point ({x}, {y}) lies on the curve (distance {distance:e} <= {epsilon:e})")]
    PointOnCurve {
        x: f64,
        y: f64,
        distance: f64,
        epsilon: f64,
    },

    #[error("pole: {0}")]
    Pole(String),

    /// A Loewner slit map produced a point outside the open upper half-plane.
    #[error("numerical instability at step {step}: {detail}")]
    NumericalInstability { step: usize, detail: String },

    /// Adaptive refinement stopped before reaching the tolerance.
    #[error("no convergence after {refinements} refinements: best {best} (error estimate {error_estimate:e})")]
    Convergence {
        best: f64,
        error_estimate: f64,
        refinements: usize,
    },

    #[error("too many failed samples: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, SigError>;

impl From<std::io::Error> for SigError {
    fn from(e: std::io::Error) -> Self {
        SigError::Io(e.to_string())
    }
}
