//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Failures reported by meshing, discretization, linear algebra and stepping.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("no quadrature rule of degree {0} is available")]
    UnsupportedQuadrature(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix factorization failed: {0}")]
    FactorizationFailed(String),
    #[error("linear solve did not reach tolerance: relative residual {residual:e} > {tol:e}")]
    SolveFailed { residual: f64, tol: f64 },
    #[error("shifted potential is not positive (F + B = {0:e})")]
    NonPositiveShift(f64),
    #[error("BDF2 step needs the previous time level")]
    MissingHistory,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;
