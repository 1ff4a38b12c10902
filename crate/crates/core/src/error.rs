use thiserror::Error;

use crate::dd::DdError;
use crate::random::ChoiceError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dd(#[from] DdError),
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("no trace of the requested length exists")]
    NoTrace,
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("more than {cap} traces; enumeration cap exceeded")]
    EnumerationCap { cap: usize },
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: impl Into<Option<usize>>, message: impl Into<String>) -> Self {
        Error::Parse {
            line: line.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
