use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("{op}: every position is masked")]
    AllMasked { op: &'static str },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("backward: loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("variable belongs to a cleared computation record")]
    StaleVariable,
    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("invalid IOB2 sequence at position {index}: {reason}")]
    InvalidIob2 { index: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("sentence {id}: {reason}")]
    InvalidSentence { id: String, reason: String },
    #[error("unknown label {label:?} for {task} vocabulary")]
    UnknownLabel { task: &'static str, label: String },
    #[error("no precomputed embedding for sentence {0:?}")]
    MissingEmbedding(String),
    #[error("embedding for {id:?}: expected {expected} rows of width {dim}, found {found:?}")]
    EmbeddingMismatch {
        id: String,
        expected: usize,
        dim: usize,
        found: Vec<usize>,
    },
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus of {size} sentences is too small for {k} folds")]
    CorpusTooSmall { size: usize, k: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

impl Error {
    pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            reason: reason.into(),
        }
    }
}
