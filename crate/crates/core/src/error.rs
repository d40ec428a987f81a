//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Code construction could not satisfy the requested degree sequence.
    #[error("construction error: {0}")]
    Construction(String),

    /// A configuration file or field is invalid. Carries the offending field name.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// A Monte Carlo histogram is too sparse to be trusted.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Threshold search bounds do not bracket the threshold.
    #[error("bracketing error: {0}")]
    Bracketing(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
