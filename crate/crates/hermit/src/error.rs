use std::io;
use std::path::{Path, PathBuf};

use hermit_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{context}: {source}")]
    Core { context: String, source: CoreError },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        AppError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        AppError::Core {
            context: context.into(),
            source,
        }
    }

    /// 1 usage, 2 data or configuration fault, 3 internal failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Io { .. } | AppError::Data(_) => 2,
            AppError::Core { source, .. } => match source {
                CoreError::Parse { .. }
                | CoreError::InvalidSentence { .. }
                | CoreError::InvalidIob2 { .. }
                | CoreError::UnknownLabel { .. }
                | CoreError::MissingEmbedding(_)
                | CoreError::EmbeddingMismatch { .. }
                | CoreError::Config(_)
                | CoreError::CorpusTooSmall { .. }
                | CoreError::LengthMismatch { .. }
                | CoreError::Empty { .. } => 2,
                _ => 3,
            },
            AppError::Internal(_) => 3,
        }
    }
}

/// Attaches a context string to core errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| AppError::core(what(), e))
    }
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    std::fs::read_to_string(path.as_ref()).map_err(|e| AppError::io(path, e))
}

pub fn write_file(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path.as_ref(), contents).map_err(|e| AppError::io(path, e))
}
