use std::fmt;
use std::process::ExitCode;

use featurenull::Error;

/// Exit status contract: 0 success, 2 usage, 3 data, 4 corrupt model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Usage = 2,
    Data = 3,
    CorruptModel = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            status: Status::Usage,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(err: impl Into<anyhow::Error>) -> Self {
        Self {
            status: Status::Data,
            error: err.into(),
        }
    }

    pub fn context_msg(self, msg: impl fmt::Display) -> Self {
        Self {
            status: self.status,
            error: self.error.context(msg.to_string()),
        }
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.status as u8)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) | Error::TooFewPoints { .. } => Status::Usage,
            _ => Status::Data,
        };
        Self {
            status,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::data(e)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Attach context to any failure while keeping its status.
pub trait Context<T> {
    fn context(self, msg: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn context(self, msg: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| e.into().context_msg(msg))
    }
}

/// Model loading failures: unreadable file is a data error, anything wrong
/// with the bytes is a corrupt model.
pub fn model_failure(e: Error) -> Failure {
    let status = match e {
        Error::Format(_) | Error::Version { .. } | Error::Truncated(_) => Status::CorruptModel,
        _ => Status::Data,
    };
    Failure {
        status,
        error: e.into(),
    }
}
