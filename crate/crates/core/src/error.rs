use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("polygon is not convex")]
    NonConvex,
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown shape class '{0}'")]
    UnknownShape(String),
    #[error("unknown tile spec '{0}'")]
    UnknownSpec(String),
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("template '{0}' is already registered")]
    DuplicateTemplate(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("vertex count mismatch for {shape}: prediction has {pred}, ground truth has {gt}")]
    VertexCountMismatch { shape: String, pred: usize, gt: usize },
    #[error("prediction tensor: {0}")]
    Tensor(String),
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
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error("{} dataset entries failed; first: entry {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Dataset(Vec<(usize, Error)>),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
