//! Error type shared across the harness.
//!
//! Errors fall into two classes that map onto process exit codes:
//! validation/parse problems (exit 1) and I/O problems (exit 2).

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Filesystem or stream failure.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input data; `line` is 1-based and includes the header line.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// Input or configuration violates a documented constraint.
    #[error("{0}")]
    Validation(String),

    /// Wraps an error with the file it came from.
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn in_file(path: impl Into<PathBuf>, source: Error) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(source),
        }
    }

    /// Process exit code for this error: 1 for validation/parse, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Parse { .. } | Error::Validation(_) => 1,
            Error::InFile { source, .. } => source.exit_code(),
        }
    }
}
