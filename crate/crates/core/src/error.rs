use thiserror::Error;

use crate::context::Condition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColorError {
    #[error("channel {channel} out of range: {value}")]
    OutOfRange { channel: &'static str, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContextError {
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("no {condition} context accepted after {rejections} rejections")]
    SamplingExhausted { condition: Condition, rejections: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("train-mode batch statistics need at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("optimizer state tracks {expected} tensors, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no records to measure")]
    EmptyRecords,
    #[error("no shared words between agent and reference lexicons")]
    EmptyIntersection,
    #[error("spread undefined for word {0:?}: fewer than two distinct chips")]
    TooFewChips(String),
    #[error("zero spread for word {0:?}: informativeness undefined")]
    ZeroSpread(String),
    #[error("slope fit needs at least 2 seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("regressor has no variance after removing group effects")]
    DegenerateVariance,
    #[error("slope comparison needs at least 2 conditions")]
    SingletonCondition,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("unknown word {0:?}")]
    UnknownWord(String),
    #[error("word index {index} outside vocabulary of {size}")]
    WordIndex { index: usize, size: usize },
    #[error("duplicate word {0:?} in vocabulary")]
    DuplicateWord(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("empty training data")]
    EmptyData,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
