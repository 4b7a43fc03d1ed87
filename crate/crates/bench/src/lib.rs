//! Experiment harness for the composite sampler: random test targets,
//! the verify / scaling / autocorr / sample experiments, and CSV output.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod targets;

pub use config::{Algorithm, Experiment, ExperimentConfig, Family, Policy};
pub use error::{BenchError, Result};
pub use experiments::{run_autocorr, run_sample, run_scaling, run_verify};
