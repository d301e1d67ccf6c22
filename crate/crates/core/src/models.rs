//! Closed-form saturation formulas, the two literature-style crosstalk
//! baselines, and the simulated measured distribution.
//!
//! The baselines act on a distribution of fired cells `m`:
//! - one-stage: every fired cell adds at most one extra count, with
//!   probability `epsilon`, so the measured count is `m + Binomial(m, epsilon)`;
//! - recursive: every fired cell starts an independent chain in which each
//!   extra count triggers another with probability `epsilon`, so a cell adds
//!   `j` counts with probability `epsilon^j (1 - epsilon)`.
//!
//! Distributions are dense `Vec<f64>` indexed by count. Truncated outputs keep
//! the mass beyond `n_max` in the last bin.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, expm1, lgamma, log, log1p, pow};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::ensemble::{fired_histogram, Executor};
use crate::error::{check_probability, Error, Result};
use crate::lattice::{DetectorGeometry, DetectorParams};
use crate::sources::PhotonSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CrosstalkModelKind {
    /// Lattice simulation; parameter is the per-neighbour probability.
    FullMc,
    /// Single crosstalk wave; parameter is the total probability.
    OneStage,
    /// Geometric crosstalk chains; parameter is the total probability.
    Recursive,
}

impl CrosstalkModelKind {
    pub const ALL: [CrosstalkModelKind; 3] = [Self::FullMc, Self::OneStage, Self::Recursive];

    pub fn name(&self) -> &'static str {
        match self {
            Self::FullMc => "full_mc",
            Self::OneStage => "one_stage",
            Self::Recursive => "recursive",
        }
    }
}

/// Mean fired cells under pile-up: `N (1 - exp(-eta n / N))`.
pub fn expected_detected(eta: f64, n_photons: f64, n_elements: usize) -> Result<f64> {
    check_probability("eta", eta)?;
    if n_elements == 0 {
        return Err(Error::ZeroElements);
    }
    let n = n_elements as f64;
    Ok(-n * expm1(-eta * n_photons / n))
}

/// Linear response `eta * n`, valid while the occupancy is small.
pub fn linear_detected(eta: f64, n_photons: f64) -> f64 {
    eta * n_photons
}

/// Exact mean number of distinct cells fired by `n_photons` photons:
/// `N (1 - (1 - eta/N)^n)`.
pub fn exact_occupancy_mean(eta: f64, n_photons: u64, n_elements: usize) -> Result<f64> {
    check_probability("eta", eta)?;
    if n_elements == 0 {
        return Err(Error::ZeroElements);
    }
    let n = n_elements as f64;
    Ok(-n * expm1(n_photons as f64 * log1p(-eta / n)))
}

/// Probability that a fired interior cell triggers at least one of its four
/// neighbours: `1 - (1 - epsilon_nn)^4`.
pub fn epsilon_total(epsilon_nn: f64) -> Result<f64> {
    check_probability("epsilon_nn", epsilon_nn)?;
    Ok(1.0 - pow(1.0 - epsilon_nn, 4.0))
}

pub(crate) fn check_normalised(pmf: &[f64]) -> Result<()> {
    let sum: f64 = pmf.iter().sum();
    if pmf.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized { sum });
    }
    Ok(())
}

fn ln_choose(n: u64, k: u64) -> f64 {
    lgamma(n as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0)
}

/// Measured-count distribution of the one-stage model.
pub fn one_stage_distribution(fired_pmf: &[f64], epsilon: f64, n_max: usize) -> Result<Vec<f64>> {
    check_normalised(fired_pmf)?;
    check_probability("epsilon", epsilon)?;
    let mut out = vec![0.0; n_max + 1];
    let (ln_e, ln_q) = (log(epsilon), log1p(-epsilon));
    for (m, &w) in fired_pmf.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        if epsilon == 0.0 || epsilon == 1.0 {
            let k = if epsilon == 0.0 { m } else { 2 * m };
            out[k.min(n_max)] += w;
            continue;
        }
        let mu = m as u64;
        for j in 0..=mu {
            let p = exp(ln_choose(mu, j) + j as f64 * ln_e + (mu - j) as f64 * ln_q);
            out[(m + j as usize).min(n_max)] += w * p;
        }
    }
    Ok(out)
}

/// Measured-count distribution of the recursive (geometric chain) model.
/// The sum of `m` chains is negative binomial.
pub fn recursive_distribution(fired_pmf: &[f64], epsilon: f64, n_max: usize) -> Result<Vec<f64>> {
    check_normalised(fired_pmf)?;
    check_probability("epsilon", epsilon)?;
    if epsilon >= 1.0 {
        return Err(Error::DivergentChains);
    }
    let mut out = vec![0.0; n_max + 1];
    let (ln_e, ln_q) = (log(epsilon), log1p(-epsilon));
    for (m, &w) in fired_pmf.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        if m == 0 || epsilon == 0.0 || m >= n_max {
            out[m.min(n_max)] += w;
            continue;
        }
        let mu = m as u64;
        let mut inside = 0.0;
        for j in 0..(n_max - m) as u64 {
            let p = exp(ln_choose(mu + j - 1, j) + j as f64 * ln_e + mu as f64 * ln_q);
            out[m + j as usize] += w * p;
            inside += p;
        }
        out[n_max] += w * (1.0 - inside).max(0.0);
    }
    Ok(out)
}

/// Distribution of distinct fired cells when `n` photons land uniformly on
/// `cells` cells with unit efficiency, for every `n <= n_max`. Columns are
/// kept for `m <= m_max` only; the recursion for column `m` needs only
/// columns `m` and `m - 1`, so the kept columns are exact.
#[derive(Debug, Clone)]
pub struct OccupancyTable {
    cells: usize,
    m_max: usize,
    rows: Vec<f64>,
}

impl OccupancyTable {
    pub fn new(cells: usize, n_max: usize, m_max: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::ZeroElements);
        }
        let m_max = m_max.min(cells);
        let width = m_max + 1;
        let mut rows = vec![0.0; (n_max + 1) * width];
        rows[0] = 1.0;
        let nc = cells as f64;
        for n in 1..=n_max {
            let (prev, cur) = rows.split_at_mut(n * width);
            let prev = &prev[(n - 1) * width..];
            let cur = &mut cur[..width];
            for m in 0..width {
                let stay = prev[m] * (m as f64 / nc);
                let grow = if m > 0 { prev[m - 1] * ((cells - m + 1) as f64 / nc) } else { 0.0 };
                cur[m] = stay + grow;
            }
        }
        Ok(Self { cells, m_max, rows })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() / (self.m_max + 1) - 1
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// P(m distinct cells | n photons), for `m <= m_max`.
    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.m_max + 1;
        &self.rows[n * w..(n + 1) * w]
    }

    /// Fired-cell distribution for photon numbers drawn from `photon_pmf`
    /// (indexed by photon number, at most `n_max + 1` entries). Entries
    /// `0..=m_max` are exact; the final entry collects everything above.
    pub fn fired_pmf(&self, photon_pmf: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m_max + 2];
        for (n, &p) in photon_pmf.iter().enumerate().take(self.n_max() + 1) {
            if p == 0.0 {
                continue;
            }
            for (o, &q) in out.iter_mut().zip(self.row(n)) {
                *o += p * q;
            }
        }
        let inside: f64 = out[..=self.m_max].iter().sum();
        out[self.m_max + 1] = (1.0 - inside).max(0.0);
        out
    }
}

/// Empirical measured-count histogram of the lattice model: run `r` draws a
/// photon number from `source` and then runs the detector, both from stream
/// `r` of `seed`. Indexed by fired count, `0..=cells`.
pub fn mc_measured_histogram<E, S>(
    exec: &E,
    source: &S,
    params: DetectorParams,
    geometry: &DetectorGeometry,
    runs: u64,
    seed: u64,
) -> Result<Vec<u64>>
where
    E: Executor + ?Sized,
    S: PhotonSource + Sync,
{
    if runs == 0 {
        return Err(Error::NoRuns);
    }
    Ok(fired_histogram(exec, geometry, seed, runs, |sim, rng| {
        let n = source.sample(rng);
        sim.run_detection(n, params, rng)
    }))
}

/// [`mc_measured_histogram`] normalised to a probability distribution.
pub fn mc_measured_distribution<E, S>(
    exec: &E,
    source: &S,
    params: DetectorParams,
    geometry: &DetectorGeometry,
    runs: u64,
    seed: u64,
) -> Result<Vec<f64>>
where
    E: Executor + ?Sized,
    S: PhotonSource + Sync,
{
    let counts = mc_measured_histogram(exec, source, params, geometry, runs, seed)?;
    Ok(counts.iter().map(|&c| c as f64 / runs as f64).collect())
}
