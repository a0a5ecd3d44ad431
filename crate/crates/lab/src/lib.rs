//! Config-driven experiment runner on top of `precursor-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{parse_config, Experiment, ExperimentConfig};
pub use error::LabError;
pub use experiments::{run, RunReport};
