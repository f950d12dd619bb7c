//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by dataset ingestion, training, and attack execution.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("no entries in ratings file {0}")]
    EmptyRatings(String),

    #[error("duplicate rating for user {user}, item {item}")]
    DuplicateEntry { user: u32, item: u32 },

    #[error("rating {0} outside [1,5]")]
    RatingOutOfRange(f64),

    #[error("value {value} outside [{lo},{hi}]")]
    ValueOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("ridge system singular for {kind} row {index}: set lambda > 0")]
    SingularRidge { kind: &'static str, index: usize },

    #[error("profile matrix in {got} scale where {expected} scale is required")]
    ScaleMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("non-finite loss at step {step}: learning rate too high?")]
    NonFiniteLoss { step: usize },

    #[error("zero matrix has no singular directions")]
    NoDirections,

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("missing side information: {0}")]
    MissingSideInfo(&'static str),

    #[error("target pair (user {user}, item {item}) is rated in train; E1 intents require unrated cells")]
    RatedPair { user: u32, item: u32 },

    #[error("percent improvement undefined: before-attack objective is 0")]
    ZeroBaseline,

    #[error(
        "fake profiles fail the distribution gate: mean TVD {tvd:.4}, mean JS {js:.4} (both must be <= {limit})"
    )]
    DistributionGate { tvd: f64, js: f64, limit: f64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
