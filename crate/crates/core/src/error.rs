use std::path::PathBuf;

use objectness_tensor::TensorError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    /// A caller-side precondition does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid network config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("corrupt manifest {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },

    #[error("layer {layer} {role}: expected shape {expected:?}, found {found:?}")]
    ArchiveShape {
        layer: usize,
        role: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("{file}: truncated blob, expected {expected} bytes, found {found}")]
    ArchiveTruncated {
        file: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{file}: checksum mismatch")]
    ArchiveChecksum { file: PathBuf },

    #[error("non-finite loss at iteration {iteration} (lr {lr}, batch {batch:?})")]
    NonFiniteLoss {
        iteration: u64,
        lr: f64,
        batch: Vec<String>,
    },

    #[error("no relevant items in ranking; average precision undefined")]
    NoRelevantItems,
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
