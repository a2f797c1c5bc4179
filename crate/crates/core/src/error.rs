use thiserror::Error;

use crate::encoding::Scheme;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("invalid quantization config: {0}")]
    InvalidConfig(String),
    #[error("non-finite input at index {index}")]
    NonFinite { index: usize },
    #[error("standard deviation must be positive and finite, got {0}")]
    InvalidStd(f64),
    #[error("value {value} at index {index} is not below {levels} levels")]
    ValueOutOfRange { index: usize, value: u32, levels: u32 },
    #[error("code word level {0} outside 0..=3")]
    InvalidCodeWord(u8),
    #[error("code word length must be positive")]
    ZeroLength,
    #[error("{scheme} with code word length {cl} holds at most {capacity} levels, got {levels}")]
    LevelsExceedCapacity {
        scheme: Scheme,
        cl: usize,
        levels: u64,
        capacity: u64,
    },
    #[error("{scheme} does not support code word length {cl}")]
    UnsupportedLength { scheme: Scheme, cl: usize },
    #[error("{words} code words do not split into dimensions of length {cl}")]
    RaggedWords { words: usize, cl: usize },
    #[error("malformed {scheme} code at dimension {dim}: {reason}")]
    Malformed {
        scheme: Scheme,
        dim: usize,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McamError {
    #[error("invalid device model: {0}")]
    InvalidModel(String),
    #[error("capacity exceeded: {required} strings required, {available} available")]
    Capacity { required: u64, available: u64 },
    #[error("no supports to lay out")]
    NoSupports,
    #[error("support {index} does not match the layout shape ({reason})")]
    Heterogeneous { index: usize, reason: &'static str },
    #[error("stored and applied lengths differ: {stored} vs {applied}")]
    LengthMismatch { stored: usize, applied: usize },
    #[error("cannot sense an empty set of currents")]
    EmptySense,
    #[error("invalid sense config: {0}")]
    InvalidSense(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Mcam(#[from] McamError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("asymmetric search needs a query with at most 4 levels, got {0}")]
    QueryLevels(u32),
    #[error("query shape does not match supports: {0}")]
    QueryMismatch(String),
    #[error("empty support set")]
    EmptySupports,
    #[error("label count {labels} differs from support count {supports}")]
    LabelCount { labels: usize, supports: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("empty support set")]
    EmptySupports,
    #[error("label count {labels} differs from support count {supports}")]
    LabelCount { labels: usize, supports: usize },
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HatError {
    #[error("invalid surrogate config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}
