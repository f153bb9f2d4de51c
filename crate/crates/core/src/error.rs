use thiserror::Error;

/// Errors produced by the re-localization library.
#[derive(Debug, Error)]
pub enum RioError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// RANSAC could not find a model with enough support. The benchmark
    /// treats this as a miss rather than a hard error.
    #[error("alignment failure: {0}")]
    AlignmentFailure(String),

    #[error("object too small: {found} keypoints, need {required}")]
    ObjectTooSmall { found: usize, required: usize },

    /// Every schema violation found in a manifest, not just the first.
    #[error("schema violations: {}", .0.join("; "))]
    Schema(Vec<String>),

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = RioError> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(RioError::InvalidArgument(msg.into()))
}
