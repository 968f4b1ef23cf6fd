//! Batch experiment runner: configuration files in, CSV and JSON artifacts
//! plus a run manifest out.

pub mod config;
pub mod error;
pub mod pipelines;
pub mod plot;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{execute, run_experiment, RunManifest};
