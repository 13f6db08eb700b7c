use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] slgate_core::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        use slgate_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Write { .. } => 3,
            CliError::Core(e) => match e {
                E::InvalidGrid(_) | E::InvalidParameter(_) | E::OutOfDomain { .. } | E::TooFewPoints { .. } => 2,
                _ => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
