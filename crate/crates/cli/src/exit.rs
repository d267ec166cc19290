use std::fmt;
use std::process::ExitCode;

use fourfold::Error;

/// Process exit statuses. These values are a stable contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    ThresholdFailed = 1,
    Config = 2,
    Io = 3,
    Numeric = 4,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            status: Status::Config,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            status: Status::Io,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Format { .. } => Status::Io,
            Error::Numeric(_) | Error::Gamut { .. } => Status::Numeric,
            Error::InvalidInput(_)
            | Error::InvalidGeometry(_)
            | Error::Shape(_)
            | Error::DegenerateKernel
            | Error::Config(_) => Status::Config,
        };
        CliError {
            status,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
