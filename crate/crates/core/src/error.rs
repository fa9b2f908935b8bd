use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid control parameters: {0}")]
    InvalidControl(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("cost {cost} needs a {expected} dataset")]
    TaskMismatch {
        cost: &'static str,
        expected: &'static str,
    },

    #[error("unbounded curvature: polynomial transfer needs a finite input bound")]
    UnboundedCurvature,

    #[error("full structural risk over {0} inputs is too large; use diagonal mode")]
    UseDiagonal(usize),

    #[error("need at least {needed} replicas, got {got}")]
    TooFewReplicas { needed: usize, got: usize },

    #[error("training infeasible at this control point: {0}")]
    Infeasible(String),

    #[error("bad magic number {found:#010x} in {path} (expected {expected:#010x})")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("truncated file {path}: need {needed} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        needed: u64,
        found: u64,
    },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("unexpected image shape {rows}x{cols} in {path}")]
    BadShape {
        path: PathBuf,
        rows: usize,
        cols: usize,
    },

    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model file corrupt: {0}")]
    CorruptModel(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
