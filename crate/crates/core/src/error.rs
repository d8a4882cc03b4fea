use std::path::PathBuf;

use crate::corpus::FoundationLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown label {label:?} (record {record})")]
    UnknownLabel { record: String, label: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("invalid record {record}: {reason}")]
    InvalidRecord { record: String, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient documents for class {class}: requested {requested}, available {available}")]
    Insufficient {
        class: FoundationLabel,
        requested: usize,
        available: usize,
    },

    #[error("prediction set does not match benchmark: {0}")]
    Alignment(String),

    #[error("few-shot exemplar {0:?} belongs to the evaluation set")]
    ShotLeakage(String),

    #[error("empty {pole} pole for {foundation} after vocabulary filtering")]
    EmptyPole {
        foundation: FoundationLabel,
        pole: &'static str,
    },

    #[error("foundation {0} has no in-vocabulary lexicon terms")]
    EmptyAnchor(FoundationLabel),

    #[error("endpoint rejected credentials (HTTP {0})")]
    Auth(u16),

    #[error("http: {0}")]
    Http(String),

    #[error("config: {0}")]
    Config(String),

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
