//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the extraction, fusion, and training stages.
#[derive(Debug, Error)]
pub enum Error {
    /// Video has fewer frames than one segment.
    #[error("video too short: {frame_count} frames < segment length {segment_length}")]
    EmptyVideo {
        frame_count: usize,
        segment_length: usize,
    },

    /// Mismatched dimensions between two inputs that must agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A segment produced no action boxes (mean box count floored to zero).
    #[error("segment contains no significant motion")]
    NoMotion,

    /// Codebook training corpus has fewer distinct vectors than requested centers.
    #[error("codebook corpus too small: requested {requested} centers, {achievable} distinct vectors")]
    SmallCorpus { requested: usize, achievable: usize },

    /// A file-backed static provider is missing the feature row for a frame.
    #[error("static feature file has no row for frame {frame}")]
    DataGap { frame: usize },

    /// A vector treated as a histogram has zero or negative mass.
    #[error("not a histogram: {0}")]
    NotAHistogram(String),

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    /// Invalid run configuration or dataset layout.
    #[error("config error: {0}")]
    Config(String),

    /// Train/test split cannot satisfy the stratification constraints.
    #[error("split error: {0}")]
    Split(String),

    /// Malformed file contents (tensor files, trajectory files, manifests).
    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
