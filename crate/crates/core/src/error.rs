use thiserror::Error;

/// Errors produced by fitting, prediction, retargeting and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("latent vector norm {norm:e} is below tolerance {tolerance:e}")]
    ZeroLatentVector { norm: f64, tolerance: f64 },
    #[error("inner system is numerically singular (condition {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("deflation direction is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("degenerate frame: all feature points coincide")]
    DegenerateFrame,
    #[error("too few correspondence pairs: need at least {required}, found {found}")]
    TooFewPairs { required: usize, found: usize },
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
