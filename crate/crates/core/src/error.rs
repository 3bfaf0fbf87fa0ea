use std::path::PathBuf;

use thiserror::Error;

use crate::compositor::CompositeError;
use crate::evaluator::EvalError;
use crate::fusion::FusionError;
use crate::geometry::GeometryError;
use crate::maskprop::MaskError;
use crate::sampling::{ManifestError, SplitError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Input files could not be read or outputs could not be written.
    Io,
    /// Inputs were readable but violate a format or domain contract.
    Validation,
    /// An internal invariant did not hold.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Image {
                source: image::ImageError::IoError(_),
                ..
            } => ErrorKind::Io,
            Error::Manifest(ManifestError::Io { .. }) => ErrorKind::Io,
            Error::Invariant(_) => ErrorKind::Internal,
            _ => ErrorKind::Validation,
        }
    }
}
