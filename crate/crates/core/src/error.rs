use thiserror::Error;

/// Errors raised by boundary construction, simulation, and experiment setup.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the formula is valid.
    #[error("domain error: {0}")]
    Domain(String),

    /// Sequence lengths or values inside a trace are inconsistent.
    #[error("structural error: {0}")]
    Structure(String),

    /// A numeric operation produced a degenerate value (zero vector, NaN).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An experiment configuration is invalid or internally inconsistent.
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
