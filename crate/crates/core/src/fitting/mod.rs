//! Reconstruction of the mean photon number and the crosstalk probability
//! from a measured photon-number histogram.
//!
//! Every model maps `(mean_n, epsilon)` to a measured-count distribution:
//! - [`CrosstalkModelKind::FullMc`]: thermal photons land on the lattice, the
//!   fired-cell distribution follows from exact occupancy statistics, and
//!   crosstalk comes from a [`CrosstalkKernel`] simulated once with a fixed
//!   seed, so every candidate is scored on the same random numbers;
//! - [`CrosstalkModelKind::OneStage`] and [`CrosstalkModelKind::Recursive`]:
//!   the closed-form baselines of [`crate::models`] applied to the same
//!   fired-cell distribution.
//!
//! Detection efficiency is folded into `mean_n`, since thinned thermal light
//! is thermal with mean `eta * mean_n`. Given the photon flux, the efficiency
//! is reported as `mean_n / flux`.
//!
//! The fit scans a parameter grid, refines the best grid point with
//! Nelder-Mead, and takes each one-sigma uncertainty from the points where the
//! profiled objective rises by one. Counts beyond the first bin whose expected
//! count falls below five are merged into a tail bin.

mod kernel;
mod optimize;

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, log, sqrt};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub use kernel::CrosstalkKernel;
use optimize::{bisect, golden_section, nelder_mead, Bounds, Point};

use crate::ensemble::Executor;
use crate::error::{check_probability, Error, Result};
use crate::lattice::DetectorGeometry;
use crate::models::{one_stage_distribution, recursive_distribution, CrosstalkModelKind, OccupancyTable};
use crate::stats::Estimate;

/// Expected count below which bins are merged into the tail.
const MIN_EXPECTED: f64 = 5.0;
const MIN_FULL_MC_RUNS: u64 = 10_000;

/// Photon-number histogram, dense in `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn new(mut counts: Vec<u64>) -> Result<Self> {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyHistogram);
        }
        Ok(Self { counts, total })
    }

    /// Builds a histogram from `(n, count)` pairs; repeated `n` add up and
    /// missing `n` count zero.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u64)>) -> Result<Self> {
        let mut counts = Vec::new();
        for (n, c) in pairs {
            if n >= counts.len() {
                counts.resize(n + 1, 0);
            }
            counts[n] += c;
        }
        Self::new(counts)
    }

    /// Counts indexed by `n`, up to the largest occupied `n`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, n: usize) -> u64 {
        self.counts.get(n).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn max_count(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn probability(&self, n: usize) -> f64 {
        self.count(n) as f64 / self.total as f64
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self.counts.iter().enumerate().map(|(n, &c)| n as f64 * c as f64).sum();
        s / self.total as f64
    }
}

/// Goodness-of-fit measure minimised by the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Objective {
    /// `sum (c - e)^2 / e`.
    #[default]
    Pearson,
    /// Poisson deviance `2 sum (e - c + c ln(c / e))`, better behaved when
    /// expected counts are small.
    Poisson,
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl ParamRange {
    pub const fn new(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    fn check(&self, name: &'static str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi && self.points >= 2 {
            Ok(())
        } else {
            Err(Error::InvalidRange {
                name,
                lo: self.lo,
                hi: self.hi,
                points: self.points,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitConfig {
    pub model: CrosstalkModelKind,
    pub mean_n: ParamRange,
    /// Per-neighbour probability for the lattice model, total probability
    /// for the baselines.
    pub epsilon: ParamRange,
    /// Simulated runs behind the crosstalk kernel (lattice model only).
    pub mc_runs: u64,
    pub seed: u64,
    pub objective: Objective,
    /// Include pile-up of several photons on one cell in the baselines.
    pub occupancy_loss: bool,
    /// Interpolation nodes of the kernel's epsilon grid.
    pub kernel_nodes: usize,
    /// Width of the Gaussian smoothing applied to the kernel along epsilon.
    pub kernel_bandwidth: f64,
    /// Mean photons per pulse reaching the detector, if known; enables the
    /// absolute efficiency estimate.
    pub photon_flux: Option<f64>,
}

impl FitConfig {
    pub fn new(model: CrosstalkModelKind) -> Self {
        let epsilon = match model {
            CrosstalkModelKind::FullMc => ParamRange::new(0.0, 0.25, 26),
            _ => ParamRange::new(0.0, 0.9, 46),
        };
        Self {
            model,
            mean_n: ParamRange::new(0.01, 10.0, 41),
            epsilon,
            mc_runs: 10_000_000,
            seed: 0,
            objective: Objective::Pearson,
            occupancy_loss: true,
            kernel_nodes: 2001,
            kernel_bandwidth: 4e-4,
            photon_flux: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.mean_n.check("mean_n")?;
        self.epsilon.check("epsilon")?;
        if self.mean_n.lo < 0.0 {
            return Err(Error::InvalidMean(self.mean_n.lo));
        }
        check_probability("epsilon", self.epsilon.lo)?;
        check_probability("epsilon", self.epsilon.hi)?;
        if self.model == CrosstalkModelKind::Recursive && self.epsilon.hi >= 1.0 {
            return Err(Error::DivergentChains);
        }
        if self.model == CrosstalkModelKind::FullMc {
            if self.mc_runs < MIN_FULL_MC_RUNS {
                return Err(Error::TooFewRuns {
                    min: MIN_FULL_MC_RUNS,
                    got: self.mc_runs,
                });
            }
            if self.kernel_nodes < 2 {
                return Err(Error::Invalid("kernel_nodes must be at least 2"));
            }
            if !(self.kernel_bandwidth.is_finite() && self.kernel_bandwidth >= 0.0) {
                return Err(Error::Invalid("kernel_bandwidth must be finite and non-negative"));
            }
        }
        if let Some(f) = self.photon_flux {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Invalid("photon flux must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::new(CrosstalkModelKind::FullMc)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FitResult {
    pub model: CrosstalkModelKind,
    /// Effective mean photon number (efficiency folded in).
    pub mean_n: Estimate,
    pub epsilon: Estimate,
    /// `mean_n / photon_flux`, when the flux was given.
    pub eta: Option<Estimate>,
    pub chi2: f64,
    pub dof: usize,
    pub objective: Objective,
    pub bins: usize,
    /// Counts `n >= tail_start` share the last bin.
    pub tail_start: usize,
    pub mean_n_at_boundary: bool,
    pub epsilon_at_boundary: bool,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof as f64
    }

    pub fn at_boundary(&self) -> bool {
        self.mean_n_at_boundary || self.epsilon_at_boundary
    }
}

/// One row of a model-versus-data table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OverlayPoint {
    pub n: usize,
    pub data: f64,
    pub model: f64,
}

/// A histogram bound to a model configuration, ready to be fitted.
#[derive(Debug, Clone)]
pub struct Fitter<'a> {
    data: &'a Histogram,
    config: FitConfig,
    occupancy: OccupancyTable,
    kernel: Option<Cow<'a, CrosstalkKernel>>,
    /// Largest count the model is evaluated at individually.
    m_limit: usize,
}

fn photon_cutoff(mean_n: f64) -> usize {
    if mean_n <= 0.0 {
        return 0;
    }
    let q = log(mean_n) - libm::log1p(mean_n);
    ceil(log(1e-15) / q) as usize
}

fn thermal_table(mean_n: f64, n_max: usize, out: &mut Vec<f64>) {
    out.clear();
    let p0 = 1.0 / (1.0 + mean_n);
    let q = mean_n * p0;
    let mut p = p0;
    for _ in 0..=n_max {
        out.push(p);
        p *= q;
        if p < 1e-300 {
            break;
        }
    }
}

fn at_bound(x: f64, lo: f64, hi: f64) -> bool {
    let tol = 1e-6 * (hi - lo);
    x - lo <= tol || hi - x <= tol
}

impl<'a> Fitter<'a> {
    /// Prepares a fit, simulating the crosstalk kernel for the lattice model.
    pub fn new<E: Executor + ?Sized>(
        exec: &E,
        data: &'a Histogram,
        config: FitConfig,
        geometry: &DetectorGeometry,
    ) -> Result<Self> {
        let kernel = if config.model == CrosstalkModelKind::FullMc {
            config.validate()?;
            Some(Cow::Owned(Self::build_kernel(exec, data, &config, geometry)?))
        } else {
            None
        };
        Self::assemble(data, config, geometry, kernel)
    }

    /// Prepares a lattice-model fit on a kernel simulated beforehand, e.g. one
    /// shared by many datasets.
    pub fn with_kernel(data: &'a Histogram, config: FitConfig, kernel: &'a CrosstalkKernel) -> Result<Self> {
        if config.model != CrosstalkModelKind::FullMc {
            return Err(Error::Invalid("a crosstalk kernel only applies to the full_mc model"));
        }
        if config.epsilon.hi > kernel.eps_max() {
            return Err(Error::Invalid("epsilon range exceeds the kernel's epsilon grid"));
        }
        let geometry = *kernel.geometry();
        Self::assemble(data, config, &geometry, Some(Cow::Borrowed(kernel)))
    }

    /// Simulates the kernel a lattice-model fit of `data` needs. Runs are
    /// spread over seed counts according to how often the data reach them.
    pub fn build_kernel<E: Executor + ?Sized>(
        exec: &E,
        data: &Histogram,
        config: &FitConfig,
        geometry: &DetectorGeometry,
    ) -> Result<CrosstalkKernel> {
        config.validate()?;
        let m_max = data.max_count().clamp(1, geometry.cells());
        let floor = (config.mc_runs / 1000).max(1000);
        let runs = CrosstalkKernel::allocate_runs(data.counts(), m_max, config.mc_runs, floor);
        CrosstalkKernel::build(
            exec,
            geometry,
            config.epsilon.hi,
            config.kernel_nodes,
            config.kernel_bandwidth,
            &runs,
            config.seed,
        )
    }

    fn assemble(
        data: &'a Histogram,
        config: FitConfig,
        geometry: &DetectorGeometry,
        kernel: Option<Cow<'a, CrosstalkKernel>>,
    ) -> Result<Self> {
        config.validate()?;
        let occupied = data.occupied_bins();
        if occupied < 3 {
            return Err(Error::TooFewBins { occupied });
        }
        let m_limit = match &kernel {
            Some(k) => data.max_count().min(k.m_max()),
            None => data.max_count(),
        };
        let occupancy = OccupancyTable::new(geometry.cells(), photon_cutoff(config.mean_n.hi), m_limit + 1)?;
        Ok(Self {
            data,
            config,
            occupancy,
            kernel,
            m_limit,
        })
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn kernel(&self) -> Option<&CrosstalkKernel> {
        self.kernel.as_deref()
    }

    /// Fired-cell distribution before crosstalk, `0..=m_limit + 1`, with the
    /// mass beyond in the final entry.
    fn fired_pmf(&self, mean_n: f64, lattice: bool) -> Vec<f64> {
        let mut photons = Vec::new();
        thermal_table(mean_n, self.occupancy.n_max(), &mut photons);
        if lattice || self.config.occupancy_loss {
            return self.occupancy.fired_pmf(&photons);
        }
        let width = self.m_limit + 2;
        let mut out = vec![0.0; width + 1];
        for (o, p) in out.iter_mut().zip(&photons) {
            *o = *p;
        }
        out.truncate(width);
        let inside: f64 = out[..width - 1].iter().sum();
        out[width - 1] = (1.0 - inside).max(0.0);
        out
    }

    /// Model probabilities of `0..tail_start` followed by the tail mass.
    fn binned_pmf(&self, x: Point, tail_start: usize) -> Result<Vec<f64>> {
        let (mean_n, eps) = (x[0], x[1]);
        let fired = self.fired_pmf(mean_n, self.config.model == CrosstalkModelKind::FullMc);
        let mut out = match self.config.model {
            CrosstalkModelKind::FullMc => {
                let kernel = self.kernel.as_deref().ok_or(Error::Invalid("missing crosstalk kernel"))?;
                let mut out = vec![0.0; tail_start + 1];
                for (k, o) in out.iter_mut().enumerate().take(tail_start) {
                    let mut p = fired[0] * if k == 0 { 1.0 } else { 0.0 };
                    for m in 1..=k {
                        p += fired[m] * kernel.conditional(m, k - m, eps);
                    }
                    *o = p;
                }
                out
            }
            model => {
                let mut w: Vec<f64> = fired[..tail_start].to_vec();
                let inside: f64 = w.iter().sum();
                w.push((1.0 - inside).max(0.0));
                match model {
                    CrosstalkModelKind::OneStage => one_stage_distribution(&w, eps, tail_start)?,
                    _ => recursive_distribution(&w, eps, tail_start)?,
                }
            }
        };
        let inside: f64 = out[..tail_start].iter().sum();
        out[tail_start] = (1.0 - inside).max(0.0);
        Ok(out)
    }

    /// Objective at `x` with counts from `tail_start` on merged.
    pub fn objective(&self, x: [f64; 2], tail_start: usize) -> f64 {
        let Ok(pmf) = self.binned_pmf(x, tail_start) else {
            return f64::INFINITY;
        };
        let total = self.data.total() as f64;
        let tail: u64 = self.data.counts().iter().skip(tail_start).sum();
        let mut sum = 0.0;
        for (k, p) in pmf.iter().enumerate() {
            let c = if k == tail_start { tail } else { self.data.count(k) } as f64;
            let e = total * p;
            if e <= 0.0 {
                if c > 0.0 {
                    return f64::INFINITY;
                }
                continue;
            }
            sum += match self.config.objective {
                Objective::Pearson => (c - e) * (c - e) / e,
                Objective::Poisson => {
                    let log_term = if c > 0.0 { c * log(c / e) } else { 0.0 };
                    2.0 * (e - c + log_term)
                }
            };
        }
        sum
    }

    /// Tail start from the data: the first `n` with fewer than five counts.
    fn data_tail(&self) -> usize {
        let t = (0..=self.m_limit + 1)
            .find(|&n| (self.data.count(n) as f64) < MIN_EXPECTED)
            .unwrap_or(self.m_limit + 1);
        t.clamp(2, self.m_limit + 1)
    }

    /// Tail start from the model at `x`: the first `n` expected fewer than
    /// five times.
    fn model_tail(&self, x: Point) -> usize {
        let limit = self.m_limit + 1;
        let Ok(pmf) = self.binned_pmf(x, limit) else {
            return self.data_tail();
        };
        let total = self.data.total() as f64;
        let t = (0..limit).find(|&n| total * pmf[n] < MIN_EXPECTED).unwrap_or(limit);
        t.clamp(2, limit)
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            lo: [self.config.mean_n.lo, self.config.epsilon.lo],
            hi: [self.config.mean_n.hi, self.config.epsilon.hi],
        }
    }

    /// Runs the fit. Grid points are scored through `exec`.
    pub fn fit<E: Executor + ?Sized>(&self, exec: &E) -> Result<FitResult> {
        let (mr, er) = (self.config.mean_n, self.config.epsilon);
        let bounds = self.bounds();

        let tail = self.data_tail();
        let scores = exec.map_batches(mr.points * er.points, |i| {
            let x = [mr.value(i / er.points), er.value(i % er.points)];
            self.objective(x, tail)
        });
        let best = scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or(Error::NoFiniteObjective)?;
        let mut x = [mr.value(best / er.points), er.value(best % er.points)];

        let mut tail = self.model_tail(x);
        let mut chi2 = f64::INFINITY;
        for _ in 0..3 {
            let f = |p: Point| self.objective(p, tail);
            let (xr, fr) = nelder_mead(&f, x, [mr.step(), er.step()], &bounds, 2000);
            x = xr;
            chi2 = fr;
            let next = self.model_tail(x);
            if next == tail {
                break;
            }
            tail = next;
            chi2 = self.objective(x, tail);
        }
        if !chi2.is_finite() {
            return Err(Error::NoFiniteObjective);
        }

        let f = |p: Point| self.objective(p, tail);
        let sigma = uncertainties(&f, x, chi2, &bounds);
        let mean_n = Estimate::new(x[0], sigma[0]);
        let eta = self
            .config
            .photon_flux
            .map(|flux| Estimate::new(mean_n.value / flux, mean_n.sigma / flux));
        let bins = tail + 1;
        Ok(FitResult {
            model: self.config.model,
            mean_n,
            epsilon: Estimate::new(x[1], sigma[1]),
            eta,
            chi2: chi2.max(0.0),
            dof: bins - 2,
            objective: self.config.objective,
            bins,
            tail_start: tail,
            mean_n_at_boundary: at_bound(x[0], mr.lo, mr.hi),
            epsilon_at_boundary: at_bound(x[1], er.lo, er.hi),
        })
    }

    /// Model probabilities of every count `0..=n_max` (no tail merging).
    /// For the lattice model `n_max` is capped at the largest count the
    /// kernel covers.
    pub fn model_pmf(&self, mean_n: f64, epsilon: f64, n_max: usize) -> Result<Vec<f64>> {
        let n_max = n_max.min(self.m_limit);
        let mut pmf = self.binned_pmf([mean_n, epsilon], n_max + 1)?;
        pmf.truncate(n_max + 1);
        Ok(pmf)
    }

    /// Data and fitted-model probabilities for every count in the data.
    pub fn overlay(&self, result: &FitResult) -> Result<Vec<OverlayPoint>> {
        let pmf = self.model_pmf(result.mean_n.value, result.epsilon.value, self.data.max_count())?;
        Ok(pmf
            .iter()
            .enumerate()
            .map(|(n, &model)| OverlayPoint {
                n,
                data: self.data.probability(n),
                model,
            })
            .collect())
    }
}

fn hessian(f: &impl Fn(Point) -> f64, x: Point, h: Point, bounds: &Bounds) -> [[f64; 2]; 2] {
    let mut c = x;
    let mut h = h;
    for a in 0..2 {
        h[a] = h[a].min(0.5 * bounds.width(a));
        c[a] = c[a].clamp(bounds.lo[a] + h[a], bounds.hi[a] - h[a]);
    }
    let at = |d0: f64, d1: f64| f([c[0] + d0 * h[0], c[1] + d1 * h[1]]);
    let f0 = at(0.0, 0.0);
    let h00 = (at(1.0, 0.0) - 2.0 * f0 + at(-1.0, 0.0)) / (h[0] * h[0]);
    let h11 = (at(0.0, 1.0) - 2.0 * f0 + at(0.0, -1.0)) / (h[1] * h[1]);
    let h01 = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h[0] * h[1]);
    [[h00, h01], [h01, h11]]
}

/// Covariance `2 H^-1` of a chi-square-like objective, if `H` is positive
/// definite.
fn covariance(h: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
    if !(h[0][0] > 0.0 && h[1][1] > 0.0 && det > 0.0 && det.is_finite()) {
        return None;
    }
    let s = 2.0 / det;
    Some([[s * h[1][1], -s * h[0][1]], [-s * h[0][1], s * h[0][0]]])
}

/// One-sigma uncertainties from the `+1` crossings of the profiled objective.
fn uncertainties(f: &impl Fn(Point) -> f64, x: Point, fmin: f64, bounds: &Bounds) -> [f64; 2] {
    // local quadratic model: the step size follows the curvature found
    let mut h = [bounds.width(0) * 1e-3, bounds.width(1) * 1e-3];
    let mut cov = None;
    for _ in 0..2 {
        let Some(c) = covariance(hessian(f, x, h, bounds)) else {
            break;
        };
        cov = Some(c);
        for a in 0..2 {
            h[a] = sqrt(c[a][a]).clamp(bounds.width(a) * 1e-6, bounds.width(a) * 0.1);
        }
    }
    let cov = cov.unwrap_or_else(|| {
        let w = [bounds.width(0) * 0.1, bounds.width(1) * 0.1];
        [[w[0] * w[0], 0.0], [0.0, w[1] * w[1]]]
    });

    let mut sigma = [0.0; 2];
    for a in 0..2 {
        let b = 1 - a;
        let quad_sigma = sqrt(cov[a][a]);
        let slope = cov[a][b] / cov[a][a];
        let cond = sqrt((cov[b][b] - cov[a][b] * slope).max(0.0));
        let half = (5.0 * cond).max(bounds.width(b) * 1e-4);
        let profile = |t: f64| {
            let centre = (x[b] + slope * (t - x[a])).clamp(bounds.lo[b], bounds.hi[b]);
            let lo = (centre - half).max(bounds.lo[b]);
            let hi = (centre + half).min(bounds.hi[b]);
            let eval = |u: f64| {
                let mut p = [0.0; 2];
                p[a] = t;
                p[b] = u;
                f(p)
            };
            let (_, v) = golden_section(&eval, lo, hi, 30);
            v.min(eval(centre)) - fmin
        };
        let crossing = |dir: f64| -> Option<f64> {
            let limit = if dir > 0.0 { bounds.hi[a] } else { bounds.lo[a] };
            let room = (limit - x[a]).abs();
            if room <= 1e-12 * bounds.width(a) {
                return None;
            }
            let mut step = quad_sigma.max(bounds.width(a) * 1e-6).min(room);
            let mut inner = 0.0;
            for _ in 0..40 {
                let g = profile(x[a] + dir * step);
                if g >= 1.0 {
                    let along = |d: f64| profile(x[a] + dir * d);
                    return Some(bisect(&along, inner, step, 1.0, 25));
                }
                if step >= room {
                    return None;
                }
                inner = step;
                step = (2.0 * step).min(room);
            }
            None
        };
        sigma[a] = match (crossing(-1.0), crossing(1.0)) {
            (Some(l), Some(u)) => 0.5 * (l + u),
            (Some(s), None) | (None, Some(s)) => s,
            (None, None) => quad_sigma,
        };
    }
    sigma
}

/// Fits `data` with one configuration.
pub fn fit_histogram<E: Executor + ?Sized>(
    exec: &E,
    data: &Histogram,
    config: &FitConfig,
    geometry: &DetectorGeometry,
) -> Result<FitResult> {
    Fitter::new(exec, data, config.clone(), geometry)?.fit(exec)
}

/// Fits `data` with every configuration; results are sorted by reduced
/// objective, best first.
pub fn compare_models<E: Executor + ?Sized>(
    exec: &E,
    data: &Histogram,
    configs: &[FitConfig],
    geometry: &DetectorGeometry,
) -> Result<Vec<FitResult>> {
    let mut results = configs
        .iter()
        .map(|c| fit_histogram(exec, data, c, geometry))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.reduced_chi2().total_cmp(&b.reduced_chi2()));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Sequential;

    fn thermal_counts(mean_n: f64, total: u64, n_max: usize) -> Vec<u64> {
        let mut t = Vec::new();
        thermal_table(mean_n, n_max, &mut t);
        t.iter().map(|p| libm::round(p * total as f64) as u64).collect()
    }

    #[test]
    fn histogram_validation() {
        assert_eq!(Histogram::new(vec![0, 0]), Err(Error::EmptyHistogram));
        let h = Histogram::from_pairs([(3, 2), (0, 5), (3, 1)]).unwrap();
        assert_eq!(h.counts(), &[5, 0, 0, 3]);
        assert_eq!(h.total(), 8);
        assert_eq!(h.occupied_bins(), 2);
        let g = DetectorGeometry::default();
        let cfg = FitConfig::new(CrosstalkModelKind::OneStage);
        assert_eq!(
            fit_histogram(&Sequential, &h, &cfg, &g).unwrap_err(),
            Error::TooFewBins { occupied: 2 }
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::new(CrosstalkModelKind::FullMc);
        cfg.mc_runs = 100;
        assert!(matches!(cfg.validate(), Err(Error::TooFewRuns { .. })));
        let mut cfg = FitConfig::new(CrosstalkModelKind::Recursive);
        cfg.epsilon.hi = 1.0;
        assert_eq!(cfg.validate(), Err(Error::DivergentChains));
        let mut cfg = FitConfig::new(CrosstalkModelKind::OneStage);
        cfg.mean_n.points = 1;
        assert!(matches!(cfg.validate(), Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn exact_thermal_data_fits_without_crosstalk() {
        // no pile-up correction, so the model is exactly thermal at eps = 0
        let h = Histogram::new(thermal_counts(1.5, 1_000_000, 60)).unwrap();
        let mut cfg = FitConfig::new(CrosstalkModelKind::Recursive);
        cfg.occupancy_loss = false;
        let r = fit_histogram(&Sequential, &h, &cfg, &DetectorGeometry::default()).unwrap();
        assert!((r.mean_n.value - 1.5).abs() < 1e-3, "{r:?}");
        assert!(r.epsilon.value < 1e-3);
        assert!(r.epsilon_at_boundary);
        assert!(r.chi2 < 1.0);
        assert!(r.mean_n.sigma > 0.0 && r.epsilon.sigma > 0.0);
    }

    #[test]
    fn binned_model_is_normalised() {
        let h = Histogram::new(thermal_counts(2.0, 100_000, 40)).unwrap();
        for model in CrosstalkModelKind::ALL {
            let mut cfg = FitConfig::new(model);
            cfg.mc_runs = 20_000;
            cfg.kernel_nodes = 101;
            let fitter = Fitter::new(&Sequential, &h, cfg, &DetectorGeometry::default()).unwrap();
            let pmf = fitter.binned_pmf([2.0, 0.05], 12).unwrap();
            assert_eq!(pmf.len(), 13);
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(pmf.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn degenerate_histogram_drives_mean_to_the_lower_edge() {
        let h = Histogram::new(vec![1_000_000, 1, 1]).unwrap();
        let mut cfg = FitConfig::new(CrosstalkModelKind::OneStage);
        cfg.mean_n = ParamRange::new(0.01, 10.0, 41);
        let r = fit_histogram(&Sequential, &h, &cfg, &DetectorGeometry::default()).unwrap();
        assert!(r.mean_n_at_boundary);
        assert_eq!(r.mean_n.value, 0.01);
        assert_eq!(r.dof, r.bins - 2);
    }
}
