use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A Touchstone file could not be parsed.
    #[error("touchstone line {line}: {message}")]
    Touchstone { line: usize, message: String },

    /// A scenario file is malformed or fails validation. `path` is the
    /// dotted key path of the offending value.
    #[error("{path}: {message}")]
    Scene { path: String, message: String },

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two geometric points coincide where a positive distance is required.
    #[error("coincident points: {0}")]
    Coincident(String),

    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The requested metric cannot be evaluated on this scene.
    #[error("incompatible scene: {0}")]
    Incompatible(String),

    /// File-system failure while reading or writing an artifact.
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn scene(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scene {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
