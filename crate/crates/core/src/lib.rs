//! Uplink Delta-OMA simulation and energy-efficiency optimization.
//!
//! - [`network`]: geometry, channel gains and system constants.
//! - [`rates`]: interference terms, rates, network metrics and constraints.
//! - [`scalarization`]: Tchebycheff scalarization, relaxation penalty, DIF
//!   decomposition and the lift to a canonical monotonic problem.
//! - [`polyblock`]: generic outer polyblock solver.
//! - [`allocation`]: relaxed solve, rounding and pinned re-solve.
//! - [`oracle`]: brute-force references used for validation.

pub mod allocation;
pub mod error;
pub mod network;
pub mod oracle;
pub mod polyblock;
pub mod rates;
pub mod scalarization;

pub use error::{Error, Result};
