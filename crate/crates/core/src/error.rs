use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HwError {
    /// Arguments outside the mathematical domain of an operation
    /// (bad `n`/`k`, wrong Hamming weight, out-of-range index, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a shape (indexer, gate count, ...) do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A dense object would exceed the configured size cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Input data that cannot be used (non-finite entries, zero vector, bad schema).
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HwError>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::HwError::Domain(format!($($arg)*)) };
}

macro_rules! dim_mismatch {
    ($($arg:tt)*) => { $crate::error::HwError::Dimension(format!($($arg)*)) };
}

pub(crate) use dim_mismatch;
pub(crate) use domain;
