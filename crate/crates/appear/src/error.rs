//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("out of bounds: {0}")]
    Bounds(String),
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("slice trigger count not divisible by slices per volume (remainder {remainder})")]
    TriggerCount { remainder: usize },
    #[error("insufficient volume epochs: {0}")]
    InsufficientEpochs(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no peaks detected: {0}")]
    NoPeaks(String),
    #[error("no candidate component: {0}")]
    NoCandidate(String),
    #[error("unreliable detection: {0}")]
    Unreliable(String),
    #[error("insufficient cardiac events: {0}")]
    InsufficientEvents(String),
    #[error("excessive artifact: {0}")]
    ExcessiveArtifact(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("degenerate channel layout: {0}")]
    Layout(String),
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
