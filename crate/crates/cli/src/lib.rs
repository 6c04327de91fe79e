//! Experiment orchestration for the importance-weighted loss: data
//! generation, paired MSE/IWL training sweeps, result files and reports.

pub mod commands;
pub mod config;
pub mod results;

pub use commands::{cmd_generate, cmd_report, cmd_train, cmd_weights, run_experiment};
pub use config::{DataSource, ExperimentConfig, ModelConfig};
pub use results::{RunFailure, RunRecord, RunResult, SCHEMA_VERSION};
