use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown user: {0}")]
    UnknownUser(String),

    #[error("cannot insert {requested} edges: only {available} non-adjacent pairs exist")]
    EdgeInsertShortfall { requested: usize, available: usize },

    #[error("degree anonymization blocked at vertex {0}: no eligible partner left")]
    BlockedVertex(String),

    #[error("query budget of {0} platform calls exhausted")]
    QueryBudgetExhausted(u64),

    #[error("{0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
