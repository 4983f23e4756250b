use thiserror::Error;

/// Error type shared across the workspace.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation's arguments was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A numerical routine could not produce a trustworthy result.
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    /// Experiment configuration could not be parsed.
    #[error("config error (line {line}): {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::NumericFailure(msg.into())
}
