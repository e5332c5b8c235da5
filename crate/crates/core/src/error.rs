use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("reference is empty, TER is undefined")]
    EmptyReference,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("at least {needed} samples required, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid target {0}: must be finite and non-negative")]
    InvalidTarget(f64),
    #[error("segment {0} has no reference")]
    MissingReference(usize),
    #[error("segment {0} has no gold post-edit for hypothesis {1}")]
    MissingGoldPostEdit(usize, usize),
    #[error("no embedding for segment {segment} ({side})")]
    MissingEmbedding { segment: usize, side: &'static str },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    EmbeddingDimension { expected: usize, got: usize },
    #[error("unknown segment {0}")]
    UnknownSegment(usize),
    #[error("segment {id} is {state}, expected {expected}")]
    WrongState {
        id: usize,
        state: &'static str,
        expected: &'static str,
    },
    #[error("hypothesis index {index} out of range for segment {segment}")]
    HypothesisIndex { segment: usize, index: usize },
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("journal sequence error: expected seq {expected}, got {got}")]
    JournalSequence { expected: u64, got: u64 },
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
