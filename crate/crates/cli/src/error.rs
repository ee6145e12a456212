use std::path::PathBuf;

use cutfem::CutFemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(CutFemError),

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{failed} verification check(s) failed")]
    VerifyFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed { .. } => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<CutFemError> for CliError {
    fn from(e: CutFemError) -> Self {
        match e {
            CutFemError::InvalidConfiguration(_)
            | CutFemError::EmptyDomain
            | CutFemError::UnsupportedOrder { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
