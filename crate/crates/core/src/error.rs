use thiserror::Error;

/// Errors raised by the reasoning engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Combination or normalization found (almost) all mass on the empty set.
    #[error("total conflict: {0}")]
    TotalConflict(String),

    /// A frame would exceed the configured configuration limit.
    #[error("frame of {size} configurations exceeds capacity {limit}")]
    Capacity { size: u128, limit: usize },

    /// Two operands live on different scopes, or a scope is not contained in another.
    #[error("scope mismatch: {0}")]
    ScopeMismatch(String),

    /// A value violates a structural or numeric invariant.
    #[error("{0}")]
    Invalid(String),

    /// A variable or value name could not be resolved.
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    /// Decombination has no solution for the given operands.
    #[error("decombination undefined: {0}")]
    Undefined(String),

    /// Text could not be parsed.
    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn scope(msg: impl Into<String>) -> Self {
        Error::ScopeMismatch(msg.into())
    }

    pub(crate) fn conflict(msg: impl Into<String>) -> Self {
        Error::TotalConflict(msg.into())
    }

    pub(crate) fn unknown_variable(name: impl Into<String>) -> Self {
        Error::Unknown { kind: "variable", name: name.into() }
    }

    pub(crate) fn unknown_value(var: &str, value: &str) -> Self {
        Error::Unknown { kind: "value", name: format!("{var}='{value}'") }
    }

    pub(crate) fn parse(position: usize, message: impl Into<String>) -> Self {
        Error::Parse { position, message: message.into() }
    }

    /// Stable one-word code used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::TotalConflict(_) => "E_CONFLICT",
            Error::Capacity { .. } => "E_CAPACITY",
            Error::Parse { .. } => "E_PARSE",
            Error::Io(_) => "E_IO",
            Error::ScopeMismatch(_) | Error::Invalid(_) | Error::Unknown { .. } | Error::Undefined(_) => "E_VALIDATE",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
