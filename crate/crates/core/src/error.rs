use thiserror::Error;

/// Errors produced by the operators, kernels and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Shapes or counts that violate an operation's precondition.
    #[error("size error: {0}")]
    Size(String),

    /// An `InstanceConfig` (or operator parameter) outside its valid range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A NaN or infinity where only finite values are allowed.
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    /// A tape that is truncated, internally inconsistent, or belongs to a
    /// different operator.
    #[error("tape integrity error: {0}")]
    Integrity(String),

    /// The finite-difference oracle evaluated the function to a non-finite value.
    #[error("finite-difference oracle: non-finite function value when perturbing coordinate {coord}")]
    Oracle { coord: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn size(msg: impl Into<String>) -> Error {
    Error::Size(msg.into())
}

pub(crate) fn integrity(msg: impl Into<String>) -> Error {
    Error::Integrity(msg.into())
}
