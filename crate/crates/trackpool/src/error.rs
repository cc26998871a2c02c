use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A malformed line; `line` is 1-based.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] trackpool_core::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }

    /// Adds the file name to an error raised while reading its contents.
    pub fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            Error::Parse { line, reason } => Error::Parse {
                line,
                reason: format!("{}: {reason}", path.display()),
            },
            other => other,
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
