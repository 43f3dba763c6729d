use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed N-best entry: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: expected {expected} feature values, found {found}")]
    InconsistentFeatureCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: feature value {token:?} is not a number")]
    NonNumericFeature { line: usize, token: String },

    #[error("reference stream {stream} has {found} lines, expected {expected}")]
    LengthMismatch {
        stream: usize,
        expected: usize,
        found: usize,
    },

    #[error("sentence {sentence} has no reference translation")]
    NoReferences { sentence: usize },

    #[error("sentence ids do not line up: {0}")]
    IdMismatch(String),

    #[error("corpus contains no sentences")]
    EmptyCorpus,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("alpha grid is empty or malformed: {0}")]
    GridEmpty(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic corpus spec: {0}")]
    SpecInvalid(String),
}
