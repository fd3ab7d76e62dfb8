use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("MLE did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("sampler initialization failed: {0}")]
    Init(String),

    #[error("evidence estimation failed: {0}")]
    Evidence(String),

    #[error("formula parse error at position {pos}: {msg}")]
    Formula { pos: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
