//! Experiment runner: builds a learner, an adversary and a loss from an
//! [`ExperimentConfig`], plays one episode per seed and writes the traces.

pub mod checks;
pub mod config;
pub mod experiment;

use std::fmt;

pub use config::{parse_seeds, ExperimentConfig};
pub use experiment::{build, run, run_grid, Aggregate};

/// Exit status for invalid configurations.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}
