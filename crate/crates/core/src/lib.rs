//! Interrupted time-series analysis: change-point estimation by profile
//! likelihood, segmented effect sizes, AR(1) error diagnostics, comparator
//! models and a seeded simulator.

pub mod baselines;
pub mod changepoint;
pub mod config;
pub mod csvio;
pub mod error;
pub mod inference;
mod linalg;
pub mod report;
pub mod simulate;
pub mod stochastic;
pub mod types;

pub use error::{Error, Result};
