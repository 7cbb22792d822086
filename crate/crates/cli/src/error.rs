use std::path::Path;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("bad data in {path}: {message}")]
    Data { path: String, message: String },

    #[error(transparent)]
    Solver(#[from] plsrod::Error),

    /// Some solves failed after the artifacts were written.
    #[error("{0}")]
    Unsolved(String),
}

impl CliError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        CliError::Config { path: path.to_string(), message: message.into() }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn data(path: &Path, message: impl Into<String>) -> Self {
        CliError::Data { path: path.display().to_string(), message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } | CliError::Data { .. } => 3,
            CliError::Solver(_) | CliError::Unsolved(_) => 4,
        }
    }

    /// The error as a single JSON object for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({ "message": self.to_string() });
        match self {
            CliError::Config { path, .. } => {
                body["kind"] = json!("config");
                body["path"] = json!(path);
            }
            CliError::Io { path, .. } => {
                body["kind"] = json!("io");
                body["path"] = json!(path);
            }
            CliError::Data { path, .. } => {
                body["kind"] = json!("data");
                body["path"] = json!(path);
            }
            CliError::Unsolved(_) => body["kind"] = json!("solver"),
            CliError::Solver(e) => {
                body["kind"] = json!("solver");
                if let plsrod::Error::NoConvergence { iterations, residual, history } = e {
                    body["iterations"] = json!(iterations);
                    body["residual"] = json!(residual);
                    body["history"] = json!(history);
                }
            }
        }
        json!({ "error": body })
    }
}
