//! Command implementations. Each one turns a recorded configuration into
//! console text plus artifacts held in memory; writing them is left to the
//! caller, which is what makes replay checks possible.

mod fit;
mod simulate;
mod sweep;

use sipm_core::ensemble::Executor;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::io::Artifact;

pub use fit::fit;
pub use simulate::simulate;
pub use sweep::sweep;

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    /// Human-readable report for the console.
    pub text: String,
    /// Files in a fixed order: the primary result first.
    pub artifacts: Vec<Artifact>,
}

impl Outputs {
    pub fn artifact(&self, role: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.role == role)
    }
}

pub fn execute<E: Executor>(config: &RunConfig, exec: &E) -> CliResult<Outputs> {
    match config {
        RunConfig::Simulate(c) => simulate(c, config),
        RunConfig::Sweep(c) => sweep(c, config, exec),
        RunConfig::Fit(c) => fit(c, config, exec),
    }
}
