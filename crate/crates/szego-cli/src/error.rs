//! CLI error taxonomy: configuration/user mistakes exit with 2, numerical
//! or runtime failures with 1.

use std::fmt;

use szego_core::CoreError;

#[derive(Debug, Clone)]
pub enum CliError {
    /// Bad config, unknown names, missing input files: exit code 2.
    Config(String),
    /// Engine, fit, or output failures on a valid config: exit code 1.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> CliError {
        CliError::Numerical(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
