use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A `(rows, cols)` pair used in dimension errors.
pub type Shape = (usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: dimension mismatch, expected {expected:?} but got {actual:?}")]
    DimensionMismatch {
        context: String,
        expected: Shape,
        actual: Shape,
    },

    #[error("matrix data length {len} does not match shape {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("non-finite value in {what} at outer iteration {iteration}")]
    Diverged { what: &'static str, iteration: usize },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e}, condition estimate {condition:e})")]
    NotPositiveDefinite { pivot: usize, value: f64, condition: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("purity window infeasible: rho = {rho} but simplex vectors in dimension {r} have l2 norm >= {lower:.6}")]
    InfeasiblePurity { rho: f64, r: usize, lower: f64 },

    #[error("purity sampling stalled: accepted {accepted} of {drawn} candidates (rate {rate:e})")]
    SamplingStall { accepted: usize, drawn: u64, rate: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic {found:?}, expected \"FUMX\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{path}: unsupported format version {found}")]
    BadVersion { path: PathBuf, found: u32 },

    #[error("{path}: truncated file, expected {expected} bytes but found {found}")]
    Truncated { path: PathBuf, expected: u64, found: u64 },

    #[error("{path}: trailing data, expected {expected} bytes but found {found}")]
    TrailingData { path: PathBuf, expected: u64, found: u64 },

    #[error("{path}: dimensions {rows}x{cols} overflow")]
    DimOverflow { path: PathBuf, rows: u64, cols: u64 },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: Shape, actual: Shape) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
