use thiserror::Error;

/// Errors raised by the kernel. Each variant maps to a CLI exit code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("precision: {0}")]
    Precision(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("unknown: {0}")]
    Unknown(String),
}

impl Error {
    pub fn parse(pos: usize, msg: impl Into<String>) -> Self {
        Error::Parse { pos, msg: msg.into() }
    }

    pub fn precision(msg: impl Into<String>) -> Self {
        Error::Precision(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn unknown(msg: impl Into<String>) -> Self {
        Error::Unknown(msg.into())
    }

    /// Offsets a parse position, for errors in embedded sub-expressions.
    pub fn shift(self, by: usize) -> Self {
        match self {
            Error::Parse { pos, msg } => Error::Parse { pos: pos + by, msg },
            e => e,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::Precision(_) => 3,
            Error::Domain(_) => 4,
            Error::Unknown(_) => 5,
        }
    }

    /// Short machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Precision(_) => "precision",
            Error::Domain(_) => "domain",
            Error::Unknown(_) => "unknown",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
