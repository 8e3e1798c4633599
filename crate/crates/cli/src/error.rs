use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed config {}: {source}", path.display())]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("malformed initial datum {}: {reason}", path.display())]
    Datum { path: PathBuf, reason: String },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] gradflow::Error),
}

impl CliError {
    /// Process exit status: 2 for anything wrong with the inputs, 3 for
    /// failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Read { .. }
            | CliError::Parse { .. }
            | CliError::Datum { .. } => 2,
            CliError::Write { .. } | CliError::Solver(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
