//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("channel mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate prior: word {0} has zero prior, log is undefined")]
    DegeneratePrior(usize),

    #[error("negative histogram entry: {0}")]
    NegativeEntry(f64),

    #[error("derivative undefined at zero (got {0})")]
    DerivativeAtZero(f64),

    #[error("no spectral form needed: Hellinger's map is exact")]
    NoSpectralForm,

    #[error("empty sequence")]
    EmptySequence,

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid label {label}, expected 1..={classes}")]
    InvalidLabel { label: usize, classes: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate channel {0}: all histograms identical, mean distance is zero")]
    DegenerateChannel(usize),

    #[error("optimization diverged: {0}")]
    Diverged(String),

    #[error("parse error in {path} at byte offset {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
