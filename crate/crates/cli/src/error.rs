use std::path::PathBuf;

use csma_core::{Error, ErrorKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    /// 0 is success; 1 I/O, 2 configuration, 3 infeasible or unstable
    /// parameters, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(..) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Infeasible => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }
}
