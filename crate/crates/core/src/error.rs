use thiserror::Error;

use crate::dicke::DickeSpace;

/// Errors raised by the symmetric-state toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operands live in different spaces: {0} vs {1}")]
    SpaceMismatch(DickeSpace, DickeSpace),

    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max |A - A^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("state norm drifted to {0} (|norm - 1| exceeds tolerance)")]
    NormDrift(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("rotation axis has zero length")]
    ZeroAxis,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncation tail weight {weight:e} exceeds {limit:e}; use at least N = {min_n}")]
    Truncation { weight: f64, limit: f64, min_n: usize },

    #[error("every parameter is frozen")]
    AllFrozen,

    #[error("target has no overlap with |0>; synthesis by powers divides by a_0")]
    ZeroGroundAmplitude,

    #[error("failed to parse {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that indicate a numerical tolerance failure rather than
    /// invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NormDrift(_) | Error::NotHermitian(_) | Error::InvalidDensity(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
