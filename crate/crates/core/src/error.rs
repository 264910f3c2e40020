use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Fisher information matrix is singular (rank deficiency {deficiency} of {dim})")]
    SingularFim { deficiency: usize, dim: usize },

    #[error("{what} is not rank-1: lambda2/lambda1 = {ratio:.3e}")]
    NotRankOne {
        what: String,
        ratio: f64,
        spectrum: Vec<f64>,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
