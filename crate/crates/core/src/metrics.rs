//! Ensemble sweeps: crosstalk, cluster size and stage count against the
//! number of initial triggers, detected counts against efficiency, and the
//! two finite-size thresholds derived from them.
//!
//! Every grid point of a sweep uses the same seed, so run `r` at one point
//! and run `r` at another share their seed placement and their crosstalk
//! uniforms. Neighbouring points are therefore positively correlated, which
//! makes differences between them far less noisy than the points themselves.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, Executor, RunStats};
use crate::error::{check_probability, Error, Result};
use crate::lattice::{DetectorGeometry, DetectorParams};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EnsembleSummary {
    pub runs: u64,
    pub mean_seeds: Estimate,
    pub mean_crosstalk: Estimate,
    pub mean_stages: Estimate,
    pub mean_fired: Estimate,
    /// Mean of n_fired / n_seed over runs with at least one seed.
    pub mean_cluster_size: Estimate,
}

impl From<&RunStats> for EnsembleSummary {
    fn from(s: &RunStats) -> Self {
        Self {
            runs: s.runs(),
            mean_seeds: s.seeds.estimate(),
            mean_crosstalk: s.crosstalk.estimate(),
            mean_stages: s.stages.estimate(),
            mean_fired: s.fired.estimate(),
            mean_cluster_size: s.cluster.estimate(),
        }
    }
}

/// Which observable a sweep is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepKind {
    /// x = n_trg, series = epsilon_nn, y = crosstalk count.
    Crosstalk,
    /// x = n_trg, series = epsilon_nn, y = n_fired / n_trg.
    ClusterSize,
    /// x = n_trg, series = epsilon_nn, y = crosstalk waves.
    Stages,
    /// x = eta, series = photon number, y = fired cells.
    Saturation,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Series {
    pub key: f64,
    pub points: Vec<EnsembleSummary>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SweepResult {
    pub kind: SweepKind,
    pub x_values: Vec<f64>,
    pub series: Vec<Series>,
}

impl SweepResult {
    /// The swept observable at series `s`, grid point `i`.
    pub fn value(&self, s: usize, i: usize) -> Estimate {
        let p = &self.series[s].points[i];
        match self.kind {
            SweepKind::Crosstalk => p.mean_crosstalk,
            SweepKind::ClusterSize => p.mean_cluster_size,
            SweepKind::Stages => p.mean_stages,
            SweepKind::Saturation => p.mean_fired,
        }
    }

    pub fn series_for(&self, key: f64) -> Option<&Series> {
        self.series.iter().find(|s| s.key == key)
    }
}

fn check_increasing(name: &'static str, xs: &[f64]) -> Result<()> {
    let ok = !xs.is_empty() && xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidRange {
            name,
            lo: xs.first().copied().unwrap_or(f64::NAN),
            hi: xs.last().copied().unwrap_or(f64::NAN),
            points: xs.len(),
        })
    }
}

fn check_trigger_grid(grid: &[usize], geometry: &DetectorGeometry) -> Result<()> {
    let xs: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    check_increasing("n_trg", &xs)?;
    let cells = geometry.cells();
    match grid.iter().find(|&&n| n == 0 || n > cells) {
        Some(&n) if n > cells => Err(Error::TooManySeeds { requested: n, cells }),
        Some(_) => Err(Error::Invalid("n_trg must be at least 1")),
        None => Ok(()),
    }
}

/// Ensemble of `runs` pulses with `n_trg` distinct random seeds.
pub fn fixed_seed_ensemble<E: Executor + ?Sized>(
    exec: &E,
    n_trg: usize,
    epsilon_nn: f64,
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<EnsembleSummary> {
    check_probability("epsilon_nn", epsilon_nn)?;
    check_trigger_grid(&[n_trg], geometry)?;
    if runs == 0 {
        return Err(Error::NoRuns);
    }
    let stats = run_ensemble(exec, geometry, seed, runs, |sim, rng| {
        sim.run_fixed_seeds(n_trg, epsilon_nn, rng)
            .expect("trigger count checked against geometry")
    });
    Ok(EnsembleSummary::from(&stats))
}

/// Ensemble of `runs` pulses of exactly `n_photons` photons.
pub fn detection_ensemble<E: Executor + ?Sized>(
    exec: &E,
    n_photons: u64,
    params: DetectorParams,
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<EnsembleSummary> {
    if runs == 0 {
        return Err(Error::NoRuns);
    }
    let stats = run_ensemble(exec, geometry, seed, runs, |sim, rng| sim.run_detection(n_photons, params, rng));
    Ok(EnsembleSummary::from(&stats))
}

fn fixed_seed_sweep<E: Executor + ?Sized>(
    kind: SweepKind,
    exec: &E,
    n_trg_grid: &[usize],
    epsilon_list: &[f64],
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<SweepResult> {
    check_trigger_grid(n_trg_grid, geometry)?;
    for &e in epsilon_list {
        check_probability("epsilon_nn", e)?;
    }
    if epsilon_list.is_empty() {
        return Err(Error::Invalid("at least one epsilon_nn value is required"));
    }
    let series = epsilon_list
        .iter()
        .map(|&eps| {
            let points = n_trg_grid
                .iter()
                .map(|&n| fixed_seed_ensemble(exec, n, eps, runs, geometry, seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(Series { key: eps, points })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind,
        x_values: n_trg_grid.iter().map(|&n| n as f64).collect(),
        series,
    })
}

/// Mean crosstalk count against the number of initial triggers.
pub fn ct_curve<E: Executor + ?Sized>(
    exec: &E,
    n_trg_grid: &[usize],
    epsilon_list: &[f64],
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<SweepResult> {
    fixed_seed_sweep(SweepKind::Crosstalk, exec, n_trg_grid, epsilon_list, runs, geometry, seed)
}

/// Mean cells fired per initial trigger against the number of triggers.
pub fn cluster_size_curve<E: Executor + ?Sized>(
    exec: &E,
    n_trg_grid: &[usize],
    epsilon_list: &[f64],
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<SweepResult> {
    fixed_seed_sweep(SweepKind::ClusterSize, exec, n_trg_grid, epsilon_list, runs, geometry, seed)
}

/// Mean number of crosstalk waves against the number of triggers.
pub fn stage_curve<E: Executor + ?Sized>(
    exec: &E,
    n_trg_grid: &[usize],
    epsilon_list: &[f64],
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<SweepResult> {
    fixed_seed_sweep(SweepKind::Stages, exec, n_trg_grid, epsilon_list, runs, geometry, seed)
}

/// Mean fired cells against detection efficiency, one series per photon
/// number.
pub fn saturation_curve<E: Executor + ?Sized>(
    exec: &E,
    eta_grid: &[f64],
    n_photons_list: &[u64],
    epsilon_nn: f64,
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<SweepResult> {
    check_increasing("eta", eta_grid)?;
    if n_photons_list.is_empty() {
        return Err(Error::Invalid("at least one photon number is required"));
    }
    let series = n_photons_list
        .iter()
        .map(|&n| {
            let points = eta_grid
                .iter()
                .map(|&eta| {
                    let params = DetectorParams::new(eta, epsilon_nn)?;
                    detection_ensemble(exec, n, params, runs, geometry, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Series { key: n as f64, points })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: SweepKind::Saturation,
        x_values: eta_grid.to_vec(),
        series,
    })
}

/// Trigger count at which crosstalk growth per trigger is suppressed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CriticalTriggers {
    pub epsilon_nn: f64,
    /// Smallest n_trg with mean cluster size below 90% of the single-trigger
    /// value, or the cell count when that never happens.
    pub critical: usize,
    pub reached: bool,
    pub baseline: Estimate,
    /// Mean cluster size at `critical`.
    pub at_critical: Estimate,
}

pub fn critical_triggers<E: Executor + ?Sized>(
    exec: &E,
    epsilon_nn: f64,
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<CriticalTriggers> {
    if !(epsilon_nn > 0.0 && epsilon_nn <= 1.0) {
        return Err(Error::InvalidProbability {
            name: "epsilon_nn",
            value: epsilon_nn,
        });
    }
    let cells = geometry.cells();
    let baseline = fixed_seed_ensemble(exec, 1, epsilon_nn, runs, geometry, seed)?.mean_cluster_size;
    let limit = 0.9 * baseline.value;
    let mut last = baseline;
    for n_trg in 2..=cells {
        let size = fixed_seed_ensemble(exec, n_trg, epsilon_nn, runs, geometry, seed)?.mean_cluster_size;
        last = size;
        if size.value < limit {
            return Ok(CriticalTriggers {
                epsilon_nn,
                critical: n_trg,
                reached: true,
                baseline,
                at_critical: size,
            });
        }
    }
    Ok(CriticalTriggers {
        epsilon_nn,
        critical: cells,
        reached: false,
        baseline,
        at_critical: last,
    })
}

/// Occupancy at which the detected count first falls more than 10% below
/// the linear response.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LinearityThreshold {
    pub n_photons: u64,
    /// `eta * n_photons / cells` at the crossing; `None` when not reached.
    pub occupancy: Option<f64>,
    pub eta: Option<f64>,
    /// Mean fired / (eta * n_photons) at the crossing, or at the last grid
    /// point when not reached.
    pub ratio: Estimate,
}

/// `step, 2 step, ..., 1` with `steps` points.
pub fn uniform_eta_grid(steps: usize) -> Vec<f64> {
    (1..=steps).map(|i| i as f64 / steps as f64).collect()
}

pub fn linearity_threshold<E: Executor + ?Sized>(
    exec: &E,
    n_photons: u64,
    eta_grid: &[f64],
    runs: u64,
    geometry: &DetectorGeometry,
    seed: u64,
) -> Result<LinearityThreshold> {
    check_increasing("eta", eta_grid)?;
    if n_photons == 0 {
        return Err(Error::Invalid("n_photons must be positive"));
    }
    let cells = geometry.cells() as f64;
    let mut ratio = Estimate::default();
    for &eta in eta_grid {
        if eta <= 0.0 {
            continue;
        }
        let params = DetectorParams::new(eta, 0.0)?;
        let fired = detection_ensemble(exec, n_photons, params, runs, geometry, seed)?.mean_fired;
        let linear = eta * n_photons as f64;
        ratio = Estimate::new(fired.value / linear, fired.sigma / linear);
        if ratio.value < 0.9 {
            return Ok(LinearityThreshold {
                n_photons,
                occupancy: Some(linear / cells),
                eta: Some(eta),
                ratio,
            });
        }
    }
    Ok(LinearityThreshold {
        n_photons,
        occupancy: None,
        eta: None,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Sequential;

    #[test]
    fn no_crosstalk_gives_zero_curves() {
        let g = DetectorGeometry::default();
        let r = ct_curve(&Sequential, &[1, 10, 50], &[0.0], 500, &g, 1).unwrap();
        for i in 0..3 {
            assert_eq!(r.value(0, i), Estimate::new(0.0, 0.0));
        }
        let c = cluster_size_curve(&Sequential, &[1, 10, 50], &[0.0], 500, &g, 1).unwrap();
        assert_eq!(c.value(0, 1), Estimate::new(1.0, 0.0));
        let s = stage_curve(&Sequential, &[1, 10], &[0.0], 500, &g, 1).unwrap();
        assert_eq!(s.value(0, 1).value, 0.0);
    }

    #[test]
    fn certain_crosstalk_fills_the_detector() {
        let g = DetectorGeometry::default();
        let grid: Vec<usize> = (1..=100).step_by(9).collect();
        let r = ct_curve(&Sequential, &grid, &[1.0], 50, &g, 2).unwrap();
        for (i, &n) in grid.iter().enumerate() {
            assert_eq!(r.value(0, i), Estimate::new((100 - n) as f64, 0.0));
        }
        let c = cluster_size_curve(&Sequential, &[1], &[1.0], 20, &g, 2).unwrap();
        assert_eq!(c.value(0, 0).value, 100.0);
    }

    #[test]
    fn zero_efficiency_detects_nothing() {
        let g = DetectorGeometry::default();
        let r = saturation_curve(&Sequential, &[0.0, 0.5], &[20], 0.0, 200, &g, 3).unwrap();
        assert_eq!(r.value(0, 0), Estimate::new(0.0, 0.0));
    }

    #[test]
    fn bad_grids_are_rejected() {
        let g = DetectorGeometry::default();
        assert!(ct_curve(&Sequential, &[5, 3], &[0.1], 10, &g, 0).is_err());
        assert!(ct_curve(&Sequential, &[0, 3], &[0.1], 10, &g, 0).is_err());
        assert!(matches!(
            ct_curve(&Sequential, &[3, 101], &[0.1], 10, &g, 0),
            Err(Error::TooManySeeds { .. })
        ));
        assert!(ct_curve(&Sequential, &[3], &[0.1], 0, &g, 0).is_err());
        assert!(critical_triggers(&Sequential, 0.0, 10, &g, 0).is_err());
    }

    #[test]
    fn weak_illumination_never_crosses_linearity_limit() {
        let g = DetectorGeometry::default();
        let t = linearity_threshold(&Sequential, 10, &uniform_eta_grid(20), 2000, &g, 4).unwrap();
        assert_eq!(t.occupancy, None);
        // closed form at full efficiency: (1 - e^-0.1)/0.1
        assert!((t.ratio.value - 0.95).abs() < 0.01);
    }
}
