//! Crate-wide error type.
//!
//! Errors carry enough context to print a one-line diagnosis and are grouped
//! into coarse classes so a caller (e.g. the CLI) can map them to exit codes
//! without matching on every variant.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration, unreadable or malformed input files.
    Input,
    /// A documented precondition of an operation was violated.
    Precondition,
    /// Numerical failure (non-finite data, no convergence, rank deficiency).
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    ParseEdgeList {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: edge list contains no usable lines")]
    EmptyEdgeList { path: PathBuf },

    #[error("{path}: {msg}")]
    Manifest { path: PathBuf, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node correspondence required: graph sizes differ ({0} vs {1})")]
    NodeCorrespondence(usize, usize),

    #[error("need at least {needed} graphs, got {got}")]
    TooFewGraphs { needed: usize, got: usize },

    #[error("requested {k} clusters but only {t} points are available")]
    TooManyClusters { k: usize, t: usize },

    #[error("graph too small: need at least {needed} nodes, got {got}")]
    GraphTooSmall { needed: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("eigensolver failed to converge ({0})")]
    NoConvergence(String),

    #[error(
        "distance matrix is numerically rank deficient: |lambda_{k}| = {magnitude:.3e} \
         below threshold {threshold:.3e}"
    )]
    RankDeficient {
        k: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// Coarse class of this error, for exit-code mapping.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Io { .. } | ParseEdgeList { .. } | EmptyEdgeList { .. } | Manifest { .. }
            | Config(_) | InvalidModel(_) | InvalidParam(_) => ErrorClass::Input,
            DimensionMismatch(_)
            | NodeCorrespondence(..)
            | TooFewGraphs { .. }
            | TooManyClusters { .. }
            | GraphTooSmall { .. } => ErrorClass::Precondition,
            NonFinite(_) | NoConvergence(_) | RankDeficient { .. } | Degenerate(_) => {
                ErrorClass::Numeric
            }
        }
    }
}
