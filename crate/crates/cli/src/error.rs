use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

/// One failed constraint, named by its configuration field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    Config {
        path: PathBuf,
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },

    #[error("configuration has {} violation(s)", .0.len())]
    Validation(Vec<Violation>),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: spinsampler::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn core(context: impl Into<String>, source: spinsampler::Error) -> Self {
        Self::Core {
            context: context.into(),
            source,
        }
    }

    /// 2 for bad input, 1 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Validation(_) => 2,
            Self::Io { .. } | Self::Core { .. } => 1,
        }
    }

    /// Machine-readable report written to stderr.
    pub fn report(&self) -> Value {
        let body = match self {
            Self::Config {
                path,
                message,
                line,
                column,
            } => json!({
                "kind": "config",
                "path": path,
                "message": message,
                "line": line,
                "column": column,
            }),
            Self::Validation(v) => json!({
                "kind": "validation",
                "message": self.to_string(),
                "violations": v,
            }),
            Self::Io { path, message } => json!({
                "kind": "io",
                "path": path,
                "message": message,
            }),
            Self::Core { context, source } => json!({
                "kind": "module",
                "context": context,
                "message": source.to_string(),
            }),
        };
        json!({ "error": body })
    }
}
