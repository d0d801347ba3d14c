use thiserror::Error;

/// Errors raised by the library. Verdict failures are not errors; they are
/// reported inside the respective report types.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coefficient model: {0}")]
    InvalidModel(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("truncation m = {m} exceeds generation radius M = {radius}")]
    TruncationExceedsRadius { m: usize, radius: usize },

    #[error("memory cap exceeded: {what} needs about {needed_bytes} bytes, cap is {cap_bytes} bytes")]
    ResourceCap {
        what: String,
        needed_bytes: u128,
        cap_bytes: u128,
    },

    #[error("innovation model violates moment assumptions: {0}")]
    MomentCondition(String),

    #[error("exact density oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value produced in {0}")]
    NonFinite(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
