use std::path::PathBuf;

use objectness_core::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The report was written but some inputs were missing.
    #[error("incomplete evaluation: {0}")]
    Incomplete(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                Error::Io { .. }
                | Error::Image { .. }
                | Error::Manifest { .. }
                | Error::ArchiveTruncated { .. }
                | Error::ArchiveChecksum { .. } => EXIT_IO,
                _ => EXIT_CONTRACT,
            },
            CliError::Usage(_) => EXIT_CONTRACT,
            CliError::Io { .. } => EXIT_IO,
            CliError::Incomplete(_) => EXIT_INCOMPLETE,
        }
    }
}
