use std::fmt;
use std::process::ExitCode;

/// A failure that ends the run, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 1).
    Usage(String),
    /// Unreadable or malformed input (exit 2).
    Input(String),
    /// Valid input the computation could not handle (exit 3).
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Compute(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
