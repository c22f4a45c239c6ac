use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the restoration library can surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Codec(String),

    #[error("backend `{backend}` failed: {message}")]
    BackendFailure {
        backend: String,
        message: String,
        diagnostics: String,
    },

    #[error("backend protocol violation: {0}")]
    Protocol(String),

    #[error("backend `{backend}` timed out after {seconds:.1} s")]
    Timeout { backend: String, seconds: f64 },

    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },

    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },

    #[error("invalid session state: {0}")]
    State(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("empty region: {0}")]
    Region(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Wraps `self` with the name of the stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage: stage.into(),
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Stage name attached to this error, if any.
    pub fn stage(&self) -> Option<&str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

impl From<image::ImageError> for Error {
    fn from(err: image::ImageError) -> Self {
        Error::Codec(err.to_string())
    }
}
