//! Experiment runner behind the `hypobridge` binary.

pub mod commands;
pub mod config;

use std::fmt;

pub use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or parameters.
    Usage(String),
    /// Assembly, factorization, divergence or other numeric failure.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hypobridge_core::Error> for CliError {
    fn from(e: hypobridge_core::Error) -> Self {
        use hypobridge_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::GridTooCoarse(_) | E::DimensionMismatch { .. } | E::UnsupportedOrder(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}

/// Exit status 0 on pass, 1 on a failed comparison.
pub fn status(pass: bool) -> i32 {
    if pass {
        0
    } else {
        1
    }
}
