use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic {found:?}, expected \"GRD1\"")]
    BadMagic { found: [u8; 4] },

    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),

    #[error("dimension mismatch: {0}")]
    DimsMismatch(String),

    #[error("expected a {expected} grid, found dtype {found}")]
    WrongDtype { expected: &'static str, found: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("superpixel map is empty")]
    EmptySuperpixels,

    #[error("superpixel label {0} is not a leaf of the merge tree")]
    UnknownLabel(u32),

    #[error("malformed merge tree: {0}")]
    MalformedTree(String),

    #[error("node labels z violate the region consistency constraint at leaf {leaf}")]
    InconsistentZ { leaf: usize },

    #[error("clique labels y violate the merge consistency constraint at node {node}")]
    InconsistentY { node: usize },

    #[error("node {0} is a leaf clique")]
    LeafClique(usize),

    #[error("cannot fit a standardizer on an empty sample set")]
    EmptySamples,

    #[error("no ground-truth segments supplied")]
    EmptySegments,

    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("no prediction for non-leaf clique {0}")]
    MissingPrediction(usize),

    #[error("no supervised samples: training would collapse to a trivial classifier")]
    NoSupervisedData,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
