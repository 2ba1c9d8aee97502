use std::path::Path;

use mai_core::chain::ChainError;
use mai_core::engine::EngineError;
use mai_core::eval::EvalError;
use mai_core::persistence::PersistenceError;
use mai_core::tasks::TaskError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or missing configuration; the message names the offending field.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed input file.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    /// Well-formed input the algorithms reject (empty point set, ragged rows, ...).
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } | CliError::Input(_) => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 3,
        }
    }

    pub fn io(context: impl std::fmt::Display, path: &Path) -> impl FnOnce(std::io::Error) -> CliError {
        let context = format!("{context} {}", path.display());
        move |source| CliError::Io { context, source }
    }

    pub fn parse(path: &Path, line: u64, msg: impl ToString) -> CliError {
        CliError::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.to_string(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnknownAblation(_) => CliError::Config(e.to_string()),
            EvalError::Engine(e) => e.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(msg) => CliError::Config(format!("engine: {msg}")),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PersistenceError> for CliError {
    fn from(e: PersistenceError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
