use escape_core::{ErrorClass, EscapeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config error at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("range error: {0}")]
    Range(String),
    #[error(transparent)]
    Solver(#[from] EscapeError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} of {1} rows disagree beyond tolerance")]
    Mismatch(usize, usize),
}

impl CliError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        CliError::Field { field: field.to_string(), message: message.into() }
    }

    /// Process exit status.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Schema { .. } | CliError::Field { .. } | CliError::Range(_) => 1,
            CliError::Csv(_) => 1,
            CliError::Solver(e) => match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Routing => 2,
                ErrorClass::Numerics => 3,
                ErrorClass::Censoring => 4,
            },
            CliError::Mismatch(..) => 5,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        // serde_json appends its own position; keep the bare message
        let text = e.to_string();
        let message = match text.rsplit_once(" at line ") {
            Some((m, _)) => m.to_string(),
            None => text,
        };
        CliError::Schema { line: e.line(), column: e.column(), message }
    }
}
