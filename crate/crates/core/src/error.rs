use thiserror::Error;

/// Errors produced by parsing, validation, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("state bound exceeded: more than {0} reachable ground states")]
    StateBound(usize),
    #[error("value iteration failed to converge within {0} sweeps")]
    Diverged(usize),
}

impl Error {
    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn not_applicable(message: impl Into<String>) -> Self {
        Error::NotApplicable(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
