//! CLI error categories; each maps to a distinct process exit code.

use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Config syntax or schema violation (exit code 2).
    Config(String),
    /// Filesystem trouble (exit code 3).
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Numerical failure inside the flow or one of its modules (exit code 4).
    Numeric(String),
    /// Forward-model evaluation failure (exit code 5).
    Model {
        message: String,
        iteration: usize,
        particle: usize,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Model { .. } => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io { path, source } => {
                write!(f, "io error at {}: {source}", path.display())
            }
            CliError::Numeric(msg) => write!(f, "numerical error: {msg}"),
            CliError::Model {
                message,
                iteration,
                particle,
            } => write!(
                f,
                "model evaluation failed at iteration {iteration}, particle {particle}: {message}"
            ),
        }
    }
}

impl std::error::Error for CliError {}
