use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DATA: u8 = 3;
    pub const DEGENERATE: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Config { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("degenerate statistics: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Core(#[from] tonewalk_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        use tonewalk_core::Error as E;
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Config { .. } | CliError::Usage(_) => exit::USAGE,
            CliError::Data(_) => exit::DATA,
            CliError::Degenerate(_) => exit::DEGENERATE,
            CliError::Core(e) => match e {
                E::Degenerate(_) | E::InvalidDof { .. } => exit::DEGENERATE,
                E::InvalidParameter { .. } | E::TooFewBlocks { .. } | E::EmptyExperiment(_) => exit::USAGE,
                _ => exit::DATA,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
