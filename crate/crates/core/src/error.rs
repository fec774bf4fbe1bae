use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("quadrature failed to converge: estimated error {estimate:.3e} exceeds {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
