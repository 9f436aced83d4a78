use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("endpoint out of range: node {node} with {num_nodes} nodes (layer {layer})")]
    EndpointOutOfRange {
        layer: usize,
        node: usize,
        num_nodes: usize,
    },

    #[error("attribute row count mismatch: expected {expected} rows, found {found}")]
    AttributeRows { expected: usize, found: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("imbalance ratio undefined: layer {layer} has no edges")]
    EmptyLayer { layer: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("target layer too small: {found} edges, need at least {required}")]
    TooFewEdges { found: usize, required: usize },

    #[error("negative sampling failed: {0}")]
    NegativeSampling(String),

    #[error("training diverged at epoch {epoch}, step {step}: non-finite loss")]
    Divergence { epoch: usize, step: usize },

    #[error("infeasible synthetic network: {0}")]
    Infeasible(String),

    #[error("classification needs at least two classes, found {0}")]
    SingleClass(usize),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("empty score list")]
    EmptyScores,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error is a user-input validation failure rather than
    /// a runtime failure; the CLI maps this onto its exit codes.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::Divergence { .. } | Error::NegativeSampling(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
