use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported payload dtype tag {0}")]
    UnsupportedDtype(u32),
    #[error("non-finite pixel at index {0}")]
    NonFinitePixel(usize),
    #[error("negative pixel at index {0}")]
    NegativePixel(usize),
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("missing sidecar key {0:?}")]
    MissingKey(&'static str),
    #[error("sidecar key {key:?} must be positive, got {value}")]
    NonPositiveValue { key: &'static str, value: f64 },
    #[error("malformed sidecar: {0}")]
    MalformedSidecar(String),
    #[error("empty shell")]
    EmptyShell,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("empty training set")]
    EmptyTraining,
    #[error("label count {labels} does not match row count {rows}")]
    LabelDimensionMismatch { rows: usize, labels: usize },
    #[error("column mismatch: expected {expected:?}, found {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("unsupported model schema version {0:?}")]
    SchemaVersionMismatch(String),
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("need more than {train_size} images, dataset has {available}")]
    InsufficientImages { train_size: usize, available: usize },
    #[error("grid cell {cell}: {source}")]
    GridCell {
        cell: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Stable variant name, used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BadMagic { .. } => "BadMagic",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::NonFinitePixel(_) => "NonFinitePixel",
            Error::NegativePixel(_) => "NegativePixel",
            Error::InvalidDimensions { .. } => "InvalidDimensions",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::MissingKey(_) => "MissingKey",
            Error::NonPositiveValue { .. } => "NonPositiveValue",
            Error::MalformedSidecar(_) => "MalformedSidecar",
            Error::EmptyShell => "EmptyShell",
            Error::InvalidParams(_) => "InvalidParams",
            Error::EmptyTraining => "EmptyTraining",
            Error::LabelDimensionMismatch { .. } => "LabelDimensionMismatch",
            Error::ColumnMismatch { .. } => "ColumnMismatch",
            Error::SchemaVersionMismatch(_) => "SchemaVersionMismatch",
            Error::MalformedModel(_) => "MalformedModel",
            Error::InsufficientImages { .. } => "InsufficientImages",
            Error::GridCell { .. } => "GridCell",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::UnknownProfile(_) => "UnknownProfile",
            Error::Io { .. } => "Io",
            Error::Json { .. } => "Json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
