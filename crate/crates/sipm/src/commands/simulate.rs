use sipm_core::rng::RngSeed;
use sipm_core::sources::PhotonSource;
use sipm_core::{DetectorParams, Error, Simulator};

use super::Outputs;
use crate::config::{Placement, RunConfig, SimulateConfig};
use crate::error::CliResult;
use crate::io::json_artifact;
use crate::render::{render_grid, summary};

/// One run, rendered as a grid, plus its JSON record.
pub fn simulate(config: &SimulateConfig, record: &RunConfig) -> CliResult<Outputs> {
    let g = config.geometry;
    let params = DetectorParams::new(config.eta, config.epsilon_nn)?;
    let mut sim = Simulator::new(g);
    let mut rng = RngSeed::new(config.seed, 0).rng();
    match &config.placement {
        Placement::Triggers { n_trg } => {
            if *n_trg == 0 {
                return Err(Error::Invalid("n_trg must be at least 1").into());
            }
            sim.place_distinct(*n_trg, &mut rng)?;
            sim.propagate(params.epsilon_nn(), &rng)?;
        }
        Placement::Cells { cells } => {
            let mut idx = Vec::with_capacity(cells.len());
            for &(r, c) in cells {
                if r >= g.rows() || c >= g.cols() {
                    return Err(Error::CellOutOfRange {
                        index: r * g.cols() + c,
                        cells: g.cells(),
                    }
                    .into());
                }
                idx.push(g.index(r, c));
            }
            sim.place_cells(&idx)?;
            sim.propagate(params.epsilon_nn(), &rng)?;
        }
        Placement::Photons { n_photons } => {
            sim.run_detection(*n_photons, params, &mut rng);
        }
        Placement::Source { source } => {
            let n = source.sample(&mut rng);
            sim.run_detection(n, params, &mut rng);
        }
    }
    let outcome = sim.outcome(true);
    let grid = outcome.grid.as_ref().expect("outcome requested with grid");
    let text = format!("{}{}", render_grid(grid), summary(&outcome));
    Ok(Outputs {
        text,
        artifacts: vec![json_artifact("simulate", record, &outcome)],
    })
}
