pub mod error;
pub mod plan;
pub mod plot;
pub mod record;
pub mod run;

pub use error::{BenchError, Result};
