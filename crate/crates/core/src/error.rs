use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("rank {rank} outside 1..={max}")]
    InvalidRank { rank: usize, max: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("adapter targets unknown layer {0}")]
    UnknownTargetLayer(usize),
    #[error("label {label} outside 0..{classes}")]
    InvalidLabel { label: usize, classes: usize },
    #[error("optimizer state does not match parameters: {0}")]
    InvalidState(String),
    #[error("reference weights are all zero")]
    DegenerateReference,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("class range {start}..{end} overlaps an existing head")]
    ClassCollision { start: usize, end: usize },
    #[error("reference backbone has not been trained")]
    ReferenceNotTrained,
    #[error("need at least {needed} tasks, got {got}")]
    InsufficientTasks { needed: usize, got: usize },
    #[error("unknown task id {0}")]
    UnknownTask(usize),
    #[error("model has no trained subnetworks")]
    ModelEmpty,
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("unknown report format {0:?}")]
    InvalidFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
