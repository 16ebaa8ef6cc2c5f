use thiserror::Error;

/// Library error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("numerical failure in {context}: {reason}")]
    Numerical { context: &'static str, reason: String },
}

impl Error {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    pub fn numerical(context: &'static str, reason: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
