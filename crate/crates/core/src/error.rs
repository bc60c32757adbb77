use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("non-binary labels: unexpected label value `{0}`")]
    NonBinaryLabels(String),

    #[error("need both classes present, found {0} distinct label(s)")]
    SingleClass(usize),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("degenerate training split: only one class present")]
    DegenerateSplit,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: model expects {expected} columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("too few distinct values: {found} (need at least {needed})")]
    TooFewDistinct { found: usize, needed: usize },

    #[error("singular working system")]
    SingularSystem,

    #[error("every smoothing parameter on the grid failed to fit")]
    AllFitsFailed,

    #[error("no informative features: every marginal ratio is constant")]
    NoInformativeFeatures,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cholesky factorization failed after jitter")]
    CholeskyFailed,

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error("unsupported model schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
