//! Error type shared by all laboratory modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ChainError>;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    /// The spectrum has an eigenvalue gap too small to certify simplicity.
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    /// Fixed-step integration was asked to run with an unstable step size.
    #[error("time step too large: {0}")]
    StepSize(String),

    /// The restriction of the drift to the decaying subspace is not Hurwitz,
    /// which indicates a bug in the subspace construction.
    #[error("stability violation: {0}")]
    StabilityViolation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
