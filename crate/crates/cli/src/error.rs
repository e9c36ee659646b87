use std::fmt;
use std::path::Path;

use ballrecycle::Error;

pub const EXIT_BAD_ARGS: i32 = 2;
pub const EXIT_STATE_SPACE: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// An error with its exit code. Printed as one line:
/// `error code=<n> kind=<kind> msg="<message>"`.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn bad_args(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_BAD_ARGS,
            kind: "bad_args",
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: EXIT_RUNTIME,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        write!(f, "error code={} kind={} msg=\"{msg}\"", self.code, self.kind)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::StateSpaceTooLarge { .. } => (EXIT_STATE_SPACE, "state_space_too_large"),
            Error::InvalidBinCount { .. }
            | Error::InvalidDistribution(_)
            | Error::InvalidConfig(_)
            | Error::Parse(_)
            | Error::BTooLarge { .. }
            | Error::ZeroProbabilityBin { .. }
            | Error::ZeroFrequencyPositiveWeight { .. } => (EXIT_BAD_ARGS, "bad_args"),
            Error::NotConverged { .. } => (EXIT_RUNTIME, "not_converged"),
            Error::Io(_) => (EXIT_RUNTIME, "io"),
            _ => (EXIT_RUNTIME, "runtime"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_RUNTIME,
            kind: "io",
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self {
            code: EXIT_RUNTIME,
            kind: "csv",
            message: e.to_string(),
        }
    }
}
