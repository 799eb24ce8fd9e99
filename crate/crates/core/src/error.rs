use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("rank {rank} out of range (valid: {min}..={max})")]
    RankOutOfRange { rank: usize, min: usize, max: usize },

    /// `z` is inside, or within the relative guard gap of, the noise spectrum.
    #[error("evaluation point {z} too close to noise singular value {singular_value}")]
    PoleProximity { z: f64, singular_value: f64 },

    #[error("spike {theta} is not above the phase transition threshold {threshold}")]
    BelowThreshold { theta: f64, threshold: f64 },

    #[error("singular value decomposition failed to converge")]
    SvdFailed,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad caller input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_) | Error::SvdFailed)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
