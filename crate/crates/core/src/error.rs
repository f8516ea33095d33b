use thiserror::Error;

/// Errors surfaced by the alignment toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty graph: {0}")]
    EmptyGraph(String),

    #[error("graph eliminated by degree filter")]
    DegreeFilterEliminated,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigenvector power iteration did not converge within {0} iterations")]
    EigenvectorNoConvergence(usize),

    #[error("SVD did not converge")]
    SvdNoConvergence,

    #[error("unknown node id `{0}`")]
    UnknownNodeId(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
