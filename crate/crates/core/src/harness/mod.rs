//! Experiment driver: configs, seeded data, experiments, run directories and
//! the acceptance suite.

pub mod config;
pub mod data;
pub mod experiments;
pub mod manifest;
pub mod suite;

pub use config::ExperimentConfig;
pub use experiments::{run_experiment, ExperimentOutput, Gate, OutputFile, EXPERIMENTS};
pub use manifest::{execute, output_root, rerun, RunManifest, RunResult};
