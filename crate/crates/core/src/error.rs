use std::path::PathBuf;

/// Errors produced anywhere in the street-network pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("fetch from {endpoint} failed (status {status:?}): {message}")]
    Fetch {
        endpoint: String,
        status: Option<u16>,
        message: String,
    },

    #[error("projection error: {0}")]
    Projection(String),

    #[error("degenerate extent: all points coincide")]
    DegenerateExtent,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("optimizer received non-finite gradient for parameter `{param}`")]
    Optimizer { param: String },

    #[error("degenerate batch: every target position is ignored")]
    DegenerateBatch,

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("non-planar embedding: edge ({}, {}) crosses edge ({}, {})", .first.0, .first.1, .second.0, .second.1)]
    NonPlanar {
        first: (usize, usize),
        second: (usize, usize),
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("capacity exceeded: {count} nodes > cap {cap}")]
    Capacity { count: usize, cap: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("join error: unmapped ids {0:?}")]
    Join(Vec<String>),

    #[error("training diverged at {context}: loss is not finite")]
    Diverged { context: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
