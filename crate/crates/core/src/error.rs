use thiserror::Error;

use crate::eps_poly::EpsPolyError;

/// Top-level error; each variant maps onto a process exit code.
#[derive(Debug, Error)]
pub enum PdlError {
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("state space exceeds cap of {cap} (reached {reached})")]
    StateCap { cap: usize, reached: usize },
    #[error(transparent)]
    Poly(#[from] EpsPolyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PdlError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        PdlError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        PdlError::Input(message.into())
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        PdlError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        PdlError::Internal(message.into())
    }

    /// 0 ok, 2 config, 3 assumption, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PdlError::Config { .. } | PdlError::Input(_) | PdlError::Io(_) => 2,
            PdlError::Assumption(_) => 3,
            PdlError::Internal(_) | PdlError::Poly(_) | PdlError::StateCap { .. } => 4,
        }
    }
}

pub type Result<T, E = PdlError> = std::result::Result<T, E>;
