use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Display strings are stable: tests and the CLI match on them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("utterance too short: {samples} samples, need at least {needed}")]
    UtteranceTooShort { samples: usize, needed: usize },

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("no voiced frames")]
    NoVoicedFrames,

    #[error("feature length mismatch: {left} vs {right} frames")]
    FeatureLengthMismatch { left: usize, right: usize },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("divergence detected: {0}")]
    Divergence(String),

    #[error("need ≥ 2 speakers, got {0}")]
    TooFewSpeakers(usize),

    #[error("corpus too small for N×M batch: {0}")]
    CorpusTooSmall(String),

    #[error("empty enrollment")]
    EmptyEnrollment,

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty training domain: {0}")]
    EmptyDomain(String),

    #[error("degenerate trial set: {0}")]
    DegenerateTrials(String),

    #[error("insufficient utterances: {0}")]
    InsufficientUtterances(String),

    #[error("split infeasible: {0}")]
    SplitInfeasible(String),

    #[error("not enough neutral utterances for plan: {0}")]
    NotEnoughNeutral(String),

    #[error("missing audio: {}", .0.display())]
    MissingAudio(PathBuf),

    #[error("duplicate utterance id: {0}")]
    DuplicateUtterance(String),

    #[error("invalid emotion: {0}")]
    InvalidEmotion(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
