use std::path::{Path, PathBuf};

use rippler_core::ModelError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}:{line}: {message}", file.display())]
    Parse { file: PathBuf, line: usize, message: String },

    #[error("individual {id:?}: {message}")]
    Consistency { id: String, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{}: corrupt chain output: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(file: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse { file: file.to_path_buf(), line, message: message.into() }
    }

    pub fn consistency(id: &str, message: impl Into<String>) -> Self {
        CliError::Consistency { id: id.to_string(), message: message.into() }
    }

    pub fn corrupt(path: &Path, message: impl Into<String>) -> Self {
        CliError::Corrupt { path: path.to_path_buf(), message: message.into() }
    }
}
