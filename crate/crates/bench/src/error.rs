use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Core(#[from] doma_core::Error),
    #[error("CSV schema: missing column {0:?}")]
    MissingColumn(String),
    #[error("CSV schema: {0}")]
    Schema(String),
    #[error("nothing to plot: {0}")]
    EmptyPlot(String),
    #[error("plot rendering failed: {0}")]
    Render(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
