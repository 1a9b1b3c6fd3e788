use thiserror::Error;

/// Errors surfaced by the segmentation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied data does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix or raster dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Underlying file I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Image decode/encode failure.
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    /// A cache or label file is structurally malformed.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
