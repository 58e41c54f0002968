//! Error types, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DrtError {
    #[error("cycle detected through node {node}")]
    Cycle { node: usize },
    #[error("node {node} violates the unique-root/unique-parent structure")]
    MultiRoot { node: usize },
    #[error("tree is disconnected: {detail}")]
    Disconnected { detail: String },
    #[error("invalid node ids: {detail}")]
    InvalidIds { detail: String },
    #[error("collection of node-sets is not realizable by any DRT: {reason}")]
    NotRealizable { reason: String },
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("projection did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("domain mismatch: {detail}")]
    Domain { detail: String },
    #[error("degenerate polytope: {detail}")]
    Degenerate { detail: String },
    #[error("invalid input: {detail}")]
    Invalid { detail: String },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance too large for exact computation: {detail}")]
    Size { detail: String },
    #[error("KL divergence is infinite (q = 0 where p > 0); tv = {tv}")]
    InfiniteKl { tv: f64 },
    #[error("floor constant too small: {detail}")]
    Floor { detail: String },
    #[error("density does not normalize: sums to {sum}")]
    Normalization { sum: f64 },
    #[error("invalid parameters: {detail}")]
    Invalid { detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum GibbsError {
    #[error("initialization cannot match the tree shape: {detail}")]
    Shape { detail: String },
    #[error("invalid configuration: {detail}")]
    Invalid { detail: String },
    #[error("domain mismatch: {detail}")]
    Domain { detail: String },
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {detail}")]
    Format {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{path}:{line}: word id {id} out of range 1..={vocab}")]
    IdOutOfRange {
        path: String,
        line: usize,
        id: usize,
        vocab: usize,
    },
    #[error("checksum mismatch for {path}: manifest {expected}, actual {actual}")]
    Checksum {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("io failure on {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json failure on {path}: {detail}")]
    Json { path: String, detail: String },
    #[error(transparent)]
    Drt(#[from] DrtError),
    #[error("invalid content in {path}: {detail}")]
    Invalid { path: String, detail: String },
}
