//! Experiment driver: configuration, data preparation, training,
//! evaluation, gradient checks and comparison sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
