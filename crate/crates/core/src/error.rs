use thiserror::Error;

use crate::aggregate::AggregateError;
use crate::backend::BackendError;
use crate::cuts::CutError;
use crate::document::DocumentError;
use crate::forge::ForgeError;
use crate::frames::FrameError;
use crate::qa::QaError;
use crate::residual::CaptionError;
use crate::segment::SegmentError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input, configuration or a failed validation.
    Input,
    /// Model backend, replay fixture or transport failure.
    Backend,
    /// Anything else: IO on our own state, bugs.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Caption(#[from] CaptionError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Qa(#[from] QaError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// The model backend failure underneath, whichever stage it surfaced in.
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            Error::Backend(e)
            | Error::Caption(CaptionError::Backend(e))
            | Error::Aggregate(AggregateError::Backend(e))
            | Error::Qa(QaError::Backend(e))
            | Error::Forge(ForgeError::Backend(e)) => Some(e),
            _ => None,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        if self.backend_error().is_some() {
            return ErrorCategory::Backend;
        }
        match self {
            Error::Forge(ForgeError::Io { .. }) => ErrorCategory::Internal,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                ErrorCategory::Input
            }
            Error::Io { .. } => ErrorCategory::Internal,
            _ => ErrorCategory::Input,
        }
    }

    /// Short machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Document(_) => "document",
            Error::Segment(_) => "segmentation",
            Error::Cut(_) => "cuts",
            Error::Frame(_) => "frames",
            Error::Backend(e)
            | Error::Caption(CaptionError::Backend(e))
            | Error::Aggregate(AggregateError::Backend(e))
            | Error::Qa(QaError::Backend(e))
            | Error::Forge(ForgeError::Backend(e)) => e.kind(),
            Error::Caption(_) => "caption",
            Error::Aggregate(_) => "aggregate",
            Error::Qa(_) => "qa",
            Error::Forge(_) => "forge",
            Error::Io { .. } => "io",
        }
    }
}
