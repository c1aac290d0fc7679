//! Command-line front end: configuration, the train / select-keywords /
//! generate-cs / evaluate pipeline and the synthetic zero-shot experiment.

pub mod commands;
pub mod config;
mod error;
pub mod report;
pub mod synth;

pub use config::{ConfigArgs, ExperimentConfig, Mode};
pub use error::{CliError, CliResult};
