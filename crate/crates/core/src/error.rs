use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no root of the trace equation in [{lo}, {hi}] (residual {residual:e})")]
    NoRoot { lo: f64, hi: f64, residual: f64 },

    #[error("input is outside the tangent-cone regime: {0}")]
    OutsideConeRegime(String),

    #[error("oracle projection did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("rejection envelope too small: ratio {ratio} exceeds bound at alpha = {re} + {im}i")]
    EnvelopeTooSmall { ratio: f64, re: f64, im: f64 },

    #[error("Husimi function negative ({0:e}); state is not positive semidefinite")]
    NegativeQ(f64),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
