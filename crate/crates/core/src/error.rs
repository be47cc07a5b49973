use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,
    #[error("line {line}: expected two whitespace-separated tokens, found {found}")]
    MalformedRecord { line: usize, found: usize },
    #[error("pair ({0}, {1}) is not an edge of the graph")]
    NotAnEdge(usize, usize),
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("graph too small to train: {0}")]
    TooSmall(String),
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("non-finite feature value in column {column} (row {row})")]
    NonFinite { row: usize, column: usize },
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("use Monte Carlo: {0}")]
    NoClosedForm(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad cache file: {0}")]
    Cache(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category string used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::EmptyGraph | Error::MalformedRecord { .. } | Error::Io { .. } => "input",
            Error::Config(_) | Error::Json(_) | Error::InvalidSpec(_) => "config",
            Error::TooSmall(_) => "insufficient-edges",
            _ => "runtime",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
