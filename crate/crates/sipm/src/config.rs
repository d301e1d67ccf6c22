//! Recorded run configurations. Every artifact embeds the configuration that
//! produced it; output paths and worker counts are left out because they do
//! not affect the bytes written.

use serde::{Deserialize, Serialize};
use sipm_core::fitting::FitConfig;
use sipm_core::sources::Source;
use sipm_core::DetectorGeometry;

use crate::io::Format;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Sweep(SweepConfig),
    Fit(FitRunConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub geometry: DetectorGeometry,
    pub eta: f64,
    pub epsilon_nn: f64,
    pub seed: u64,
    pub placement: Placement,
}

/// How the initial triggers of a single run are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// `n_trg` distinct random cells.
    Triggers { n_trg: usize },
    /// Explicit `(row, col)` cells.
    Cells { cells: Vec<(usize, usize)> },
    /// A fixed photon number, detected with efficiency `eta`.
    Photons { n_photons: u64 },
    /// A photon number drawn from a source, detected with efficiency `eta`.
    Source { source: Source },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub geometry: DetectorGeometry,
    pub runs: u64,
    pub seed: u64,
    pub format: Format,
    pub sweep: Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    /// Mean crosstalk count against trigger count.
    Ct { n_trg: Vec<usize>, epsilon_nn: Vec<f64> },
    /// Mean cells fired per trigger against trigger count.
    Cluster { n_trg: Vec<usize>, epsilon_nn: Vec<f64> },
    /// Mean crosstalk waves against trigger count.
    Stages { n_trg: Vec<usize>, epsilon_nn: Vec<f64> },
    /// Trigger count at which the cluster size per trigger drops by 10%.
    Critical { epsilon_nn: Vec<f64> },
    /// Mean fired cells against efficiency, per photon number.
    Saturation { eta: Vec<f64>, n_photons: Vec<u64>, epsilon_nn: f64 },
    /// Occupancy at which the response falls 10% below linear.
    Linearity { n_photons: Vec<u64>, eta: Vec<f64> },
    /// Measured-count histogram of a photon source.
    Histogram { source: Source, eta: f64, epsilon_nn: f64 },
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ct { .. } => "ct",
            Self::Cluster { .. } => "cluster",
            Self::Stages { .. } => "stages",
            Self::Critical { .. } => "critical",
            Self::Saturation { .. } => "saturation",
            Self::Linearity { .. } => "linearity",
            Self::Histogram { .. } => "histogram",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRunConfig {
    pub geometry: DetectorGeometry,
    /// Where the histogram was read from; informational only.
    pub histogram_path: String,
    /// The histogram itself, so a replay does not depend on the input file.
    pub counts: Vec<u64>,
    pub overlay_format: Format,
    pub fits: Vec<FitConfig>,
}
