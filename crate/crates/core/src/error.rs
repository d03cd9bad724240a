use std::path::PathBuf;

/// Everything that can go wrong inside the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic at offset 0: expected \"CMTX\", found {found:?}")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{path}: unsupported version {version} at offset 4")]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("{path}: unsupported dtype code {code} at offset 8")]
    UnsupportedDtype { path: PathBuf, code: u8 },

    #[error("{path}: nonzero reserved header byte at offset {offset}")]
    ReservedBytes { path: PathBuf, offset: usize },

    #[error("{path}: truncated: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: {extra} trailing bytes after payload at offset {offset}")]
    TrailingBytes {
        path: PathBuf,
        offset: u64,
        extra: u64,
    },

    #[error("non-finite value at ({row},{col}) (byte offset {offset})")]
    NonFinite { row: usize, col: usize, offset: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("anchor not found: {word:?} (available: {available})")]
    AnchorNotFound { word: String, available: String },

    #[error("checkpoint not found: {layer}@{epoch}")]
    CheckpointNotFound { layer: String, epoch: u64 },

    #[error("run failed validation:\n{0}")]
    Validation(String),

    #[error("non-finite loss at step {step}")]
    Diverged { step: usize },

    #[error("zero variance: all points are identical")]
    ZeroVariance,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Output {
            path: path.into(),
            source,
        }
    }

    /// True when the error stems from the caller's inputs (including
    /// unreadable input files) rather than from computing or writing results.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Output { .. } | Error::Diverged { .. } | Error::ZeroVariance
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
