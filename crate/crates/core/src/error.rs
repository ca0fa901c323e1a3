use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("duplicate case id `{0}`")]
    DuplicateCaseId(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("corpus has {0} documents, at least 3 are needed to split")]
    CorpusTooSmall(usize),

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("embedding provider failed: {0}")]
    ProviderFailure(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NonSquareMatrix { rows: usize, cols: usize },

    #[error("invalid mask size {0}: must be odd and at least 3")]
    InvalidMaskSize(usize),

    #[error("invalid target segment count {target} for {sentences} sentences")]
    InvalidTargetCount { target: usize, sentences: usize },

    #[error("span {start}..{end} out of range for document with {len} sentences")]
    SpanOutOfRange { start: usize, end: usize, len: usize },

    #[error("training set contains a single class")]
    SingleClassTrainingSet,

    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("prompt text is empty")]
    EmptyText,

    #[error("{labels} labels supplied for {segments} segments")]
    LabelSegmentMismatch { labels: usize, segments: usize },

    #[error("document `{0}` has no argumentative segments")]
    NoArgumentativeSegments(String),

    #[error("completion request of {tokens} tokens exceeds provider context of {limit}")]
    RequestTooLarge { tokens: usize, limit: usize },

    #[error("completion provider failed after {attempts} attempt(s): {message}")]
    CompletionFailed { attempts: u32, message: String },

    #[error("unknown provider profile `{0}`")]
    UnknownProfile(String),

    #[error("reference text is empty")]
    EmptyReference,

    #[error("no rows to render")]
    EmptyRows,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(serde_json::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
