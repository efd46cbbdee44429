use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system config: {0}")]
    InvalidConfig(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid scalarization config: {0}")]
    InvalidScalarization(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: u64 },
    #[error(transparent)]
    Solver(#[from] crate::polyblock::SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
