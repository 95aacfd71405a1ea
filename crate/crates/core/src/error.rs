use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Ways a checkpoint file can fail to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointFault {
    NotACheckpoint,
    VersionMismatch,
    Truncated,
    ChecksumMismatch,
    ArchitectureMismatch,
    Malformed,
}

impl CheckpointFault {
    pub fn code(self) -> &'static str {
        match self {
            CheckpointFault::NotACheckpoint => "checkpoint.not_a_checkpoint",
            CheckpointFault::VersionMismatch => "checkpoint.version_mismatch",
            CheckpointFault::Truncated => "checkpoint.truncated",
            CheckpointFault::ChecksumMismatch => "checkpoint.checksum_mismatch",
            CheckpointFault::ArchitectureMismatch => "checkpoint.architecture_mismatch",
            CheckpointFault::Malformed => "checkpoint.malformed",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{message}")]
    Checkpoint {
        fault: CheckpointFault,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn checkpoint(fault: CheckpointFault, message: impl Into<String>) -> Self {
        Error::Checkpoint {
            fault,
            message: message.into(),
        }
    }

    /// Stable machine-readable code printed alongside the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Shape(_) => "shape",
            Error::Contract(_) => "contract",
            Error::Numeric(_) => "numeric",
            Error::DegenerateData(_) => "degenerate_data",
            Error::Ingestion(_) => "ingestion",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Checkpoint { fault, .. } => fault.code(),
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numeric, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numeric(_) => 4,
            Error::Io { .. } => 5,
            _ => 3,
        }
    }
}
