use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration at `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },

    #[error(transparent)]
    Core(#[from] radshoot::Error),
}

/// Structured form written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse_error",
            CliError::Validation { .. } => "validation_error",
            CliError::Io { .. } => "io_error",
            CliError::Core(e) if e.is_numerical() => "numerical_failure",
            CliError::Core(_) => "invalid_input",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
            line: match self {
                CliError::Parse { line, .. } => Some(*line),
                _ => None,
            },
            key: match self {
                CliError::Validation { key, .. } => Some(key.clone()),
                _ => None,
            },
        }
    }
}
