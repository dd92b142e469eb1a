use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed mesh file (line {line}): {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("unknown physical tag {0} on boundary element")]
    UnknownTag(i32),

    #[error("missing boundary part {0}")]
    MissingTag(&'static str),

    #[error("design boundary not a single closed loop")]
    DesignLoop,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate design edge {0} (zero length)")]
    DegenerateEdge(usize),

    #[error("singular transformation in element {element}: det = {det:e}")]
    SingularTransform { element: usize, det: f64 },

    #[error("non-positive transformation determinant in element {element}: det = {det:e}")]
    InvertedElement { element: usize, det: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("continuation aborted: {0}")]
    ContinuationAborted(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
