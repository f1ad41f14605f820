use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can surface, grouped by category so the CLI can
/// print a stable `error[category]` prefix and pick an exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing or unreadable database listing: {0}")]
    Ingestion(String),
    #[error("manifest integrity: {0}")]
    Integrity(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid size: {0}")]
    Size(String),
    #[error("outside function domain: {0}")]
    Domain(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("image/reference alignment: {0}")]
    Alignment(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image decode {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::Ingestion(_) => "ingestion",
            Error::Integrity(_) => "integrity",
            Error::Range(_) => "range",
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Size(_) => "size",
            Error::Domain(_) => "domain",
            Error::Numeric(_) => "numeric",
            Error::Alignment(_) => "alignment",
            Error::UndefinedCorrelation(_) => "correlation",
            Error::Usage(_) => "usage",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Tensor(_) => "tensor",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Ingestion(_) | Error::Integrity(_) | Error::Io { .. } | Error::Image { .. } => 3,
            Error::Checkpoint(_) => 4,
            _ => 1,
        }
    }
}
