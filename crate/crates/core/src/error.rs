use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions or an incompatible policy/environment pairing.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A non-finite value appeared. `step` is the trajectory step, when known.
    #[error("numeric error{}: {message}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numeric { step: Option<usize>, message: String },

    /// A malformed model or file. `line` is 1-based when the input is text.
    #[error("validation error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation { line: Option<usize>, message: String },

    #[error("enumeration needs up to {required} trajectories but the cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(step: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Numeric { step, message: msg.into() }
    }

    pub(crate) fn validation(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Validation { line, message: msg.into() }
    }
}
