//! Error category carried up to the process exit code: configuration and
//! validation problems exit 2, runtime/inference problems exit 3.

use std::fmt;

pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn config<E: Into<anyhow::Error>>(e: E) -> Self {
        CliError::Config(e.into())
    }

    pub fn runtime<E: Into<anyhow::Error>>(e: E) -> Self {
        CliError::Runtime(e.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Runtime(e) => write!(f, "runtime error: {e:#}"),
        }
    }
}
