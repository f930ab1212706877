use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown {kind} '{name}' (valid: {valid})")]
    UnknownName { kind: &'static str, name: String, valid: String },
    #[error("{0}")]
    Config(String),
    #[error("grid has {size} points, more than the cap of {cap}")]
    GridTooLarge { size: u128, cap: u128 },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] vrpg_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HarnessError {
    /// Usage errors exit with status 2, everything else with 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::Parse { .. }
                | HarnessError::UnknownName { .. }
                | HarnessError::Config(_)
                | HarnessError::GridTooLarge { .. }
        )
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        HarnessError::Parse { line, message: message.into() }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
