use thiserror::Error;

/// Errors surfaced by the simulation core.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or parameter dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A caller-supplied value violates an operation precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// An experiment or method configuration is inconsistent.
    #[error("invalid config: {0}")]
    Config(String),

    /// A feature file or config document could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A requested data partition cannot be realized.
    #[error("partition infeasible: {0}")]
    Partition(String),

    /// A numeric routine failed to converge or factorize.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
