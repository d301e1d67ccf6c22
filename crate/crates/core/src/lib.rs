//! Monte Carlo model of photon detection in silicon photomultiplier arrays.
//!
//! The detector is a rectangular lattice of Geiger-mode cells. Photons land
//! uniformly on the lattice and fire a cell with the detection efficiency;
//! every fired cell may then fire each of its four nearest neighbours with
//! the crosstalk probability, wave after wave, until no new cell fires. A cell
//! fires at most once per pulse.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `sipm` companion crate.
//!
//! Modules:
//! - [`lattice`]: geometry, the single-run engine and its outcome record.
//! - [`sources`]: photon-number distributions (thermal, fixed).
//! - [`ensemble`]: batched, order-independent ensemble execution.
//! - [`metrics`]: sweeps over trigger count, crosstalk and efficiency.
//! - [`models`]: closed-form saturation, the one-stage and recursive
//!   crosstalk baselines, and the simulated measured distribution.
//! - [`fitting`]: chi-square reconstruction of mean photon number and
//!   crosstalk probability from a photon-number histogram.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod ensemble;
pub mod fitting;
pub mod lattice;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod sources;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::{CellState, DetectorGeometry, DetectorParams, Grid, RunOutcome, Simulator};
pub use rng::RngSeed;
pub use stats::Estimate;
