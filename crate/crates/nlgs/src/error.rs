use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel K_{{0,0}} is identically zero; geometry is undefined")]
    DegenerateKernel,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("rescaled field leaks {leak:.3e} of its mass out of the box")]
    RescaleOutOfBox { leak: f64 },
    #[error("invalid couplings: {0}")]
    InvalidCouplings(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
