use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid K = {k} for a cloud of {n} points (need 1 <= K <= N - 1)")]
    InvalidK { k: usize, n: usize },

    #[error("degenerate bandwidth: median neighbor distance is zero")]
    DegenerateBandwidth,

    #[error("kernel matrix is not positive semidefinite (tolerance {tolerance:e})")]
    InvalidKernel { tolerance: f64 },

    #[error("NNK solver did not converge after {iterations} iterations")]
    SolverFailure {
        iterations: usize,
        last_iterate: Vec<f64>,
    },

    #[error("node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate neighborhood: {0}")]
    DegenerateNeighborhood(String),

    #[error("zero scatter around node {0}")]
    ZeroScatter(usize),

    #[error("basis is not orthonormal (deviation {deviation:e})")]
    InvalidBasis { deviation: f64 },

    #[error("cannot merge a cloud with {0} point(s)")]
    CannotMerge(usize),

    #[error("oracle refuses dimension {dim} (limit {limit})")]
    OracleTooLarge { dim: usize, limit: usize },
}

impl Error {
    pub(crate) fn at_node(self, node: usize) -> Self {
        Error::AtNode {
            node,
            source: Box::new(self),
        }
    }

    /// Strips any node annotation and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtNode { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by degenerate data rather than bad input.
    pub fn is_degenerate_data(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateBandwidth
                | Error::DegenerateNeighborhood(_)
                | Error::ZeroScatter(_)
                | Error::CannotMerge(_)
                | Error::InvalidKernel { .. }
        )
    }

    /// True for failures caused by malformed input or configuration.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidSpec(_)
                | Error::InvalidConfig(_)
                | Error::Parse { .. }
                | Error::EmptyInput(_)
                | Error::InvalidK { .. }
                | Error::InvalidBasis { .. }
                | Error::OracleTooLarge { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
