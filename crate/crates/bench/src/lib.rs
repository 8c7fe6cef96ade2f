//! Experiment harness for `qapcore`: instance generation, training, evaluation,
//! paired comparison and a verification battery. Every CSV carries a trailing
//! `# config_hash=… master_seed=…` line.

pub mod check;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
