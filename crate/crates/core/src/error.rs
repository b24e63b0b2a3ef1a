use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A point or parameter lies outside the domain where a map is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exact computation disagreed with an invariant it must satisfy.
    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("no profile found: {0}")]
    NoProfileFound(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable tag, used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Domain(_) => "domain",
            Error::InternalConsistency(_) => "internal-consistency",
            Error::NoProfileFound(_) => "no-profile-found",
            Error::Parse(_) => "parse",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
