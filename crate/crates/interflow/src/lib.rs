//! Experiment runner for `interflow-core`: JSON configuration files, parallel
//! batch execution, CSV/JSON artifacts and the `interflow` command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod runner;

pub use experiment::{run_experiment, RunReport};
pub use runner::run_batch;
