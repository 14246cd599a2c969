use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("inner oracle of component {component} does not support exact evaluation")]
    UnsupportedExactEvaluation { component: usize },

    #[error("point lies outside the box domain at coordinate {coordinate} (value {value})")]
    DomainViolation { coordinate: usize, value: f64 },

    #[error("dual state holds a u-sequence where an explicit dual table is required")]
    RepresentationMismatch,

    #[error("invalid batch size {size} for a population of {population}")]
    InvalidBatchSize { size: usize, population: usize },

    #[error("outer function `{0}` is not smooth")]
    NotSmooth(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("group {0} has no samples")]
    EmptyGroup(usize),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate selection: {0}")]
    DegenerateSelection(String),

    #[error("at least {required} points are required, got {got}")]
    InsufficientPoints { required: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on `{path}`: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
