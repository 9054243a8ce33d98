use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate article id `{id}` at lines {first} and {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("empty vocabulary: no token satisfies the document-frequency bounds")]
    EmptyVocabulary,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in `{op}`: {details}")]
    ShapeMismatch { op: &'static str, details: String },

    #[error("feature block `{block}` has {got} rows, expected {expected}")]
    BlockDimension {
        block: String,
        expected: usize,
        got: usize,
    },

    #[error("unknown feature group `{0}`")]
    UnknownFeatureGroup(String),

    #[error("embedding file is missing ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("inconsistent embedding dimension at line {line}: expected {expected}, got {got}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("loss tensor must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("cannot sample {requested} negative pairs: only {available} non-edges exist")]
    InfeasibleNegativeCount { requested: usize, available: usize },

    #[error("graph too small: {0}")]
    GraphTooSmall(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("power-law fit is degenerate: all values equal the lower cutoff")]
    DegeneratePowerLaw,

    #[error("empty group `{0}`")]
    EmptyGroup(String),

    #[error("zero vector where a direction is required")]
    ZeroVector,

    #[error("pivot labels must differ")]
    IdenticalPivots,

    #[error("label `{0}` not present in the group embedding")]
    UnknownLabel(String),

    #[error("positive set is empty")]
    NoPositives,

    #[error("score set `{0}` is empty")]
    EmptyScores(&'static str),

    #[error("empty matrix: {0}")]
    EmptyMatrix(String),

    #[error("bad file format: {0}")]
    BadFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
