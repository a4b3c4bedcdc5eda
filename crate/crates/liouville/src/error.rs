//! Command errors, their exit codes and their JSON form on stderr.

use std::path::{Path, PathBuf};

use liouville_core::scenarios::ScenarioError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Io,
    Validation,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io => 2,
            ErrorKind::Validation => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// File the error concerns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// JSON pointer into that file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), file: None, pointer: None }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError { file: Some(path.to_path_buf()), ..Self::new(ErrorKind::Io, format!("{}: {err}", path.display())) }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, message)
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Numerical, message)
    }

    pub fn in_file(mut self, path: &Path) -> Self {
        self.file = Some(path.to_path_buf());
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid { path, message } => {
                CliError { pointer: Some(path.clone()), ..CliError::validation(format!("{path}: {message}")) }
            }
            ScenarioError::Unknown(_) => CliError::validation(e.to_string()),
            ScenarioError::Stage { .. } => CliError::numerical(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
