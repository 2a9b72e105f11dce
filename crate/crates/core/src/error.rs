use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size limit exceeded: {what} is {got}, at most {max} supported")]
    SizeLimit {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// No augmenting path exists in a sparse graph that was supposed to be regular.
    #[error("infeasible graph: no augmenting path from row {row}")]
    Infeasible { row: usize },

    #[error("invalid k: {k} (must satisfy 1 <= k <= {n})")]
    InvalidK { k: usize, n: usize },

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate labels: training split has {classes} distinct class(es), need at least 2")]
    DegenerateLabels { classes: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("invalid artifact kind `{0}`")]
    InvalidKind(String),

    #[error("{path}: expected {expected} rows, found {found}")]
    ManifestMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Several validation problems collected in one pass.
    #[error("dataset validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
