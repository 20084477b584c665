use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    EndpointOutOfRange(usize, usize, usize),

    #[error("row count mismatch: {what} has {found} rows, expected {expected}")]
    RowMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("k = {k} is out of range for a graph with {n} nodes (need 1 <= k < n)")]
    NeighborCount { k: usize, n: usize },

    #[error("empty graph: homophily is undefined without edges")]
    EmptyGraph,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("empty index set: {0}")]
    EmptyMask(&'static str),

    #[error("backward requires a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
