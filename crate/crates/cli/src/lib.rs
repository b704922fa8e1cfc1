//! Command-line front end: scenario ingestion, simulation, comparison,
//! parameter sweeps, robustness experiments, and trajectory analysis.

pub mod commands;
pub mod csvio;
pub mod pool;
pub mod scenario;
pub mod svg;

/// Error kind mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Scenario/schema/argument problems: exit code 2.
    Validation,
    /// Numerical failures during computation: exit code 3.
    Runtime,
}

#[derive(Debug, Clone)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message,
        }
    }

    pub fn runtime(message: String) -> Self {
        CliError {
            kind: ErrorKind::Runtime,
            message,
        }
    }

    pub fn with_kind(kind: ErrorKind, message: String) -> Self {
        CliError { kind, message }
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Runtime => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}
