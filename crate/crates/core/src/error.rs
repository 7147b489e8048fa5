use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("incompatible geometry: {0}")]
    Incompatible(String),
    #[error("insufficient edge layers: {0}")]
    InsufficientLayers(String),
    #[error("coupling error: {0}")]
    Coupling(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("integrator failed: {0}")]
    Integrator(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
