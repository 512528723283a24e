use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("product {0}: nonpositive price")]
    NonpositivePrice(String),
    #[error("duplicate product id {0}")]
    DuplicateId(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("product {id}: expected dimension {expected}, got {actual}")]
    Dimension {
        id: String,
        expected: usize,
        actual: usize,
    },
    #[error("undefined cosine: zero vector")]
    UndefinedCosine,
    #[error("unknown product id {0}")]
    UnknownId(String),
    #[error("missing feature {kind} for product {id}")]
    MissingFeature { id: String, kind: String },
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("no positive pairs to evaluate")]
    NoPositives,
    #[error("product {0}: empty candidate set")]
    EmptyCandidates(String),
    #[error("disconnected comparison graph: components {0:?}")]
    Disconnected(Vec<Vec<String>>),
    #[error("degenerate MLE: {0}")]
    DegenerateMle(String),
    #[error("target {target} unachievable; achievable mean RBO range is [{low:.4}, {high:.4}]")]
    Unachievable { target: f64, low: f64, high: f64 },
    #[error("step {step} failed: {cause}")]
    Step { step: String, cause: Box<Error> },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
