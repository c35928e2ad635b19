use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed hierarchy document: {0}")]
    MalformedHierarchy(String),
    #[error("duplicate leaf name `{0}` in hierarchy")]
    DuplicateLeaf(String),
    #[error("node `{0}` has an empty children list")]
    EmptyChildren(String),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("class index {index} out of range for {k} classes")]
    ClassOutOfRange { index: usize, k: usize },
    #[error("example index {index} out of range for {n} examples")]
    ExampleOutOfRange { index: usize, n: usize },
    #[error("composite index {index} out of range for {m} composites")]
    CompositeOutOfRange { index: usize, m: usize },
    #[error("question is not informative: composite {composite} against partial label {label}")]
    Uninformative { composite: String, label: String },
    #[error("inconsistent answer: eliminating {eliminated} would empty partial label {label}")]
    InconsistentAnswer { label: String, eliminated: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty partial label")]
    EmptyPartialLabel,
    #[error("example {0} is already exactly labeled")]
    AlreadyExact(usize),
    #[error("no informative question available")]
    NoInformativeQuestion,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("engine protocol violation: {0}")]
    Protocol(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
