use thiserror::Error;

/// Errors raised by the inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-domain input (p-values outside [0,1], bad indices, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A combination of settings that cannot be honored, e.g. a level too large for `B`.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Identifiers in a selection that the session does not know.
    #[error("unknown ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),

    /// The exhaustive optimal bound refuses sets above its size guard.
    #[error("selection of size {size} exceeds the exhaustive limit of {limit}; use augmentation_bound or disjoint_sum_bound")]
    TooLarge { size: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
