//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that must be full rank was numerically rank deficient.
    #[error("numerical rank {actual} below required {expected}")]
    NumericalRank { expected: usize, actual: usize },

    /// An iterative solver exhausted its budget. The last iterate is kept so
    /// callers can inspect how far it got.
    #[error("solver did not converge within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last: Box<crate::estimators::ChannelEstimate>,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An experiment file failed validation; `path` names the offending field.
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
