use std::io;
use std::path::PathBuf;

use defire::DefireError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The configuration does not parse, does not validate, or references a
    /// missing file.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] DefireError),
    /// A check the command performs on its own results failed.
    #[error("{0}")]
    Check(String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::Check(_) | CliError::Output { .. } => 1,
        }
    }
}
