use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stages that can fail to produce a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Face,
    Nose,
    Coin,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Face => write!(f, "face"),
            Stage::Nose => write!(f, "nose"),
            Stage::Coin => write!(f, "coin"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("manifest {path} row {row}: {message}")]
    ManifestRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("io {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}-not-found")]
    StageFailure { stage: Stage },

    #[error("model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("synthesis skipped every sample: {0}")]
    AllSamplesSkipped(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
