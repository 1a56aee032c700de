//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by dataset handling, embedding, clustering, attacks and
/// the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {path}:{index}: {reason}")]
    MalformedRecord {
        path: String,
        index: usize,
        reason: String,
    },

    #[error("duplicate report id `{0}`")]
    DuplicateId(String),

    #[error("dataset mixes labeled and unlabeled reports")]
    MixedLabeling,

    #[error("dataset too small: need at least {need} reports, got {got}")]
    DatasetTooSmall { need: usize, got: usize },

    #[error("infeasible synthetic config: {0}")]
    InfeasibleConfig(String),

    #[error("report `{id}` has {len} events, shorter than q-gram length {q}")]
    ReportShorterThanQ { id: String, len: usize, q: usize },

    #[error("report `{id}` contains no q-gram known to the feature space")]
    EmptyEmbedding { id: String },

    #[error("operation requires family labels")]
    UnlabeledInput,

    #[error("sample-count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("index {index} outside the partition's sample range {n}")]
    UnknownIndex { index: usize, n: usize },

    #[error("soft assignment row {row} sums to {sum}, not 1")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("output directory {0} already contains results (pass force to overwrite)")]
    OutputExists(PathBuf),

    #[error("empty result: nothing to write")]
    EmptyResult,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
