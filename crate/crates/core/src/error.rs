use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A located message produced while reading rule text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {}", join_diagnostics(.0))]
    Parse(Vec<Diagnostic>),

    #[error("evaluation error in rule `{rule}`: {message}")]
    Evaluation { rule: String, message: String },

    #[error("unknown atom: no clauses for {}", .0.join(", "))]
    UnknownAtom(Vec<String>),

    #[error("unsupported program: {0}")]
    Unsupported(String),

    #[error("capacity exceeded: {found} random switches, limit is {limit}")]
    Capacity { found: usize, limit: usize },

    #[error("cell ({row}, {col}): {source}")]
    Cell {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("cancelled")]
    Cancelled,

    #[error("http error: {message}\n--- query ---\n{query}")]
    Http { message: String, query: String },

    #[error("malformed GeoJSON: {0}")]
    GeoJson(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Diagnostics carried by a parse error, if any.
    pub fn diagnostics(&self) -> Option<&[Diagnostic]> {
        match self {
            Error::Parse(d) => Some(d),
            Error::Stage { source, .. } | Error::Cell { source, .. } => source.diagnostics(),
            _ => None,
        }
    }
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
