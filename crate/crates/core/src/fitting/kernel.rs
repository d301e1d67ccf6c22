//! Crosstalk transfer kernel for the lattice model.
//!
//! `P(n_fired = m + j | m distinct uniform seeds, epsilon_nn)` for every
//! `epsilon_nn` in `[0, eps_max]` at once, from one set of simulated runs.
//!
//! Give every directed neighbour pair its own uniform `u`. A cell is fired
//! by crosstalk at `epsilon_nn` exactly when some path from a seed to it uses
//! only pairs with `u < epsilon_nn`, i.e. when its bottleneck value (the
//! smallest, over paths, of the largest `u` on the path) is below
//! `epsilon_nn`. A minimax Dijkstra search from the seeds yields those
//! bottleneck values in ascending order, so a single run tells how many
//! cells fire at every `epsilon_nn`. Evaluating all candidates from the same
//! runs is the common-random-numbers scheme the fit relies on: the objective
//! is deterministic and varies smoothly with `epsilon_nn`.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::{Rng, RngCore};

use crate::ensemble::{fold_runs, Executor, BATCH};
use crate::error::{check_probability, Error, Result};
use crate::lattice::DetectorGeometry;
use crate::rng::{threshold, StreamKey};

/// Survival tables `S(m, j, eps) = P(at least j crosstalk cells)`, stored on
/// a uniform `eps` grid and interpolated linearly in between.
///
/// The raw tables are empirical distribution functions and so are rough on
/// the scale of single events. They are smoothed along `eps` with a Gaussian
/// of the given bandwidth, which keeps the fit objective smooth enough for
/// curvature-based uncertainties.
#[derive(Debug, Clone)]
pub struct CrosstalkKernel {
    geometry: DetectorGeometry,
    eps_max: f64,
    step: f64,
    nodes: usize,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, Default)]
struct Row {
    runs: u64,
    /// Smoothed survival probabilities, `[j - 1][node]`, for
    /// `j = 1..=len / nodes`.
    survive: Vec<f64>,
}

/// Runs simulated between merges into the survival counts.
const CHUNK: u64 = 64 * BATCH;

struct Workspace {
    neighbours: Vec<[u32; 4]>,
    perm: Vec<u32>,
    swaps: Vec<u32>,
    best: Vec<u32>,
    done: Vec<bool>,
    touched: Vec<u32>,
    heap: BinaryHeap<Reverse<(u32, u32)>>,
    /// (j, node) events of this batch.
    events: Vec<(u32, u32)>,
}

impl Workspace {
    fn new(geometry: &DetectorGeometry) -> Self {
        let cells = geometry.cells();
        let neighbours = (0..cells)
            .map(|i| {
                let mut slots = [u32::MAX; 4];
                for (s, j) in slots.iter_mut().zip(geometry.neighbours(i)) {
                    *s = j as u32;
                }
                slots
            })
            .collect();
        Self {
            neighbours,
            perm: (0..cells as u32).collect(),
            swaps: Vec::new(),
            best: vec![u32::MAX; cells],
            done: vec![false; cells],
            touched: Vec::new(),
            heap: BinaryHeap::new(),
            events: Vec::new(),
        }
    }

    /// Bottleneck values of the crosstalk cells reachable below `limit`, in
    /// ascending order, pushed as events through `node_of`.
    fn run(&mut self, m: usize, limit: u64, rng: &mut impl RngCore, node_of: impl Fn(u32) -> u32) {
        let cells = self.perm.len();
        for &c in &self.touched {
            self.best[c as usize] = u32::MAX;
            self.done[c as usize] = false;
        }
        self.touched.clear();
        self.heap.clear();

        // m distinct seeds by partial Fisher-Yates, undone afterwards
        self.swaps.clear();
        for i in 0..m {
            let j = rng.random_range(i as u32..cells as u32);
            self.perm.swap(i, j as usize);
            self.swaps.push(j);
            let s = self.perm[i];
            self.done[s as usize] = true;
            self.best[s as usize] = 0;
            self.touched.push(s);
        }
        for (i, &j) in self.swaps.iter().enumerate().rev() {
            self.perm.swap(i, j as usize);
        }

        for k in 0..m {
            let s = self.touched[k];
            self.relax(s, 0, limit, rng);
        }
        let mut j = 0u32;
        while let Some(Reverse((d, c))) = self.heap.pop() {
            if self.done[c as usize] {
                continue;
            }
            self.done[c as usize] = true;
            j += 1;
            self.events.push((j, node_of(d)));
            self.relax(c, d, limit, rng);
        }
    }

    fn relax(&mut self, from: u32, level: u32, limit: u64, rng: &mut impl RngCore) {
        for &b in &self.neighbours[from as usize] {
            if b == u32::MAX || self.done[b as usize] {
                continue;
            }
            let u = rng.next_u32();
            let cand = level.max(u);
            if u64::from(cand) < limit && cand < self.best[b as usize] {
                if self.best[b as usize] == u32::MAX {
                    self.touched.push(b);
                }
                self.best[b as usize] = cand;
                self.heap.push(Reverse((cand, b)));
            }
        }
    }
}

/// Symmetric discrete Gaussian weights, `w[0]` the centre, for a width of
/// `sigma` grid steps. A width of zero gives no smoothing.
fn gaussian_weights(sigma: f64) -> Vec<f64> {
    if sigma < 1e-3 {
        return vec![1.0];
    }
    let half = libm::ceil(4.0 * sigma) as usize;
    let mut w: Vec<f64> = (0..=half)
        .map(|h| libm::exp(-0.5 * (h as f64 / sigma) * (h as f64 / sigma)))
        .collect();
    let norm = w[0] + 2.0 * w[1..].iter().sum::<f64>();
    for x in &mut w {
        *x /= norm;
    }
    w
}

/// Smooths cumulative counts along the grid and normalises by `runs`.
/// Beyond either end the row is continued by point reflection about the end
/// node, which keeps straight segments straight and `S(0) = 0` exact.
fn smooth_row(counts: &[u32], weights: &[f64], runs: f64, out: &mut [f64]) {
    let n = counts.len() as isize;
    let c = |i: isize| f64::from(counts[i as usize]);
    let at = |i: isize| -> f64 {
        if i < 0 {
            2.0 * c(0) - c((-i).min(n - 1))
        } else if i >= n {
            2.0 * c(n - 1) - c((2 * (n - 1) - i).max(0))
        } else {
            c(i)
        }
    };
    for (g, o) in out.iter_mut().enumerate() {
        let g = g as isize;
        let mut v = weights[0] * at(g);
        for (h, w) in weights.iter().enumerate().skip(1) {
            let h = h as isize;
            v += w * (at(g - h) + at(g + h));
        }
        *o = (v / runs).clamp(0.0, 1.0);
    }
}

impl CrosstalkKernel {
    /// Simulates `runs_per_seed_count[m]` runs with `m` seeds for every
    /// `m >= 1` (entry 0 is ignored). `nodes` grid points span
    /// `[0, eps_max]`.
    pub fn build<E: Executor + ?Sized>(
        exec: &E,
        geometry: &DetectorGeometry,
        eps_max: f64,
        nodes: usize,
        bandwidth: f64,
        runs_per_seed_count: &[u64],
        seed: u64,
    ) -> Result<Self> {
        check_probability("eps_max", eps_max)?;
        if nodes < 2 || eps_max <= 0.0 {
            return Err(Error::InvalidRange {
                name: "kernel epsilon grid",
                lo: 0.0,
                hi: eps_max,
                points: nodes,
            });
        }
        let cells = geometry.cells();
        let m_max = runs_per_seed_count.len().saturating_sub(1);
        if m_max > cells {
            return Err(Error::TooManySeeds {
                requested: m_max,
                cells,
            });
        }
        if !(bandwidth.is_finite() && bandwidth >= 0.0) {
            return Err(Error::Invalid("kernel bandwidth must be finite and non-negative"));
        }
        let step = eps_max / (nodes - 1) as f64;
        let weights = gaussian_weights(bandwidth / step);
        let node_thresholds: Vec<u64> = (0..nodes).map(|g| threshold(g as f64 * step)).collect();
        let limit = node_thresholds[nodes - 1];
        let node_of = |d: u32| node_thresholds.partition_point(|&t| t <= u64::from(d)) as u32;
        let key = StreamKey::new(seed);

        let mut rows = vec![Row::default(); m_max + 1];
        for m in 1..=m_max {
            let runs = runs_per_seed_count[m];
            if runs == 0 {
                return Err(Error::NoRuns);
            }
            if runs > u64::from(u32::MAX) {
                return Err(Error::Invalid("at most 2^32 - 1 kernel runs per seed count"));
            }
            // events are folded into the counts chunk by chunk to bound memory
            let mut depth = 0usize;
            let mut survive: Vec<u32> = Vec::new();
            let mut start = 0u64;
            while start < runs {
                let len = CHUNK.min(runs - start);
                let parts = fold_runs(
                    exec,
                    len,
                    || Workspace::new(geometry),
                    |ws, r| {
                        let mut rng = key.stream(((m as u64) << 40) | (start + r));
                        ws.run(m, limit, &mut rng, node_of);
                    },
                );
                for w in &parts {
                    for &(j, g) in &w.events {
                        let j = j as usize;
                        if j > depth {
                            depth = j;
                            survive.resize(depth * nodes, 0);
                        }
                        survive[(j - 1) * nodes + g as usize] += 1;
                    }
                }
                start += len;
            }
            let mut smooth = vec![0.0; depth * nodes];
            for j in 0..depth {
                let row = &mut survive[j * nodes..(j + 1) * nodes];
                for g in 1..nodes {
                    row[g] += row[g - 1];
                }
                let out = &mut smooth[j * nodes..(j + 1) * nodes];
                smooth_row(row, &weights, runs as f64, out);
            }
            rows[m] = Row { runs, survive: smooth };
        }
        Ok(Self {
            geometry: *geometry,
            eps_max,
            step,
            nodes,
            rows,
        })
    }

    /// Runs for each seed count in proportion to how often the data reach
    /// that count, `P(count >= m)`, with a floor of `min_runs`.
    pub fn allocate_runs(counts: &[u64], m_max: usize, budget: u64, min_runs: u64) -> Vec<u64> {
        let total: u64 = counts.iter().sum();
        let mut tail = vec![0u64; m_max + 2];
        for m in (0..=m_max).rev() {
            tail[m] = tail[m + 1] + counts.get(m).copied().unwrap_or(0);
        }
        // counts above m_max still reach every m <= m_max
        let above: u64 = counts.iter().skip(m_max + 1).sum();
        let weights: Vec<f64> = (0..=m_max)
            .map(|m| if m == 0 { 0.0 } else { (tail[m] + above) as f64 / total.max(1) as f64 })
            .collect();
        let wsum: f64 = weights.iter().sum();
        weights
            .iter()
            .enumerate()
            .map(|(m, w)| {
                if m == 0 {
                    0
                } else if wsum > 0.0 {
                    (libm::round(budget as f64 * w / wsum) as u64).max(min_runs)
                } else {
                    min_runs
                }
            })
            .collect()
    }

    pub fn geometry(&self) -> &DetectorGeometry {
        &self.geometry
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn m_max(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn runs(&self, m: usize) -> u64 {
        self.rows[m].runs
    }

    pub fn total_runs(&self) -> u64 {
        self.rows.iter().map(|r| r.runs).sum()
    }

    /// P(at least `j` crosstalk cells | `m` seeds, `eps`).
    pub fn survival(&self, m: usize, j: usize, eps: f64) -> f64 {
        if j == 0 {
            return 1.0;
        }
        if m == 0 {
            return 0.0;
        }
        let row = &self.rows[m];
        let depth = row.survive.len() / self.nodes;
        if j > depth {
            return 0.0;
        }
        let x = (eps.clamp(0.0, self.eps_max) / self.step).max(0.0);
        let g0 = (libm::floor(x) as usize).min(self.nodes - 2);
        let f = x - g0 as f64;
        let base = (j - 1) * self.nodes;
        let a = row.survive[base + g0];
        let b = row.survive[base + g0 + 1];
        a + f * (b - a)
    }

    /// P(exactly `extra` crosstalk cells | `m` seeds, `eps`).
    pub fn conditional(&self, m: usize, extra: usize, eps: f64) -> f64 {
        self.survival(m, extra, eps) - self.survival(m, extra + 1, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Sequential;

    #[test]
    fn extremes_of_the_epsilon_grid() {
        let g = DetectorGeometry::default();
        let k = CrosstalkKernel::build(&Sequential, &g, 1.0, 11, 0.0, &[0, 200, 200], 3).unwrap();
        for m in 1..=2 {
            assert_eq!(k.conditional(m, 0, 0.0), 1.0);
            // at eps = 1 every cell fires
            assert_eq!(k.conditional(m, 100 - m, 1.0), 1.0);
        }
    }

    #[test]
    fn allocation_follows_data_tail() {
        let r = CrosstalkKernel::allocate_runs(&[50, 30, 20], 3, 1000, 10);
        assert_eq!(r[0], 0);
        assert!(r[1] > r[2] && r[2] >= r[3]);
        assert_eq!(r[3], 10);
    }

    #[test]
    fn survival_is_monotone_in_epsilon() {
        let g = DetectorGeometry::default();
        let k = CrosstalkKernel::build(&Sequential, &g, 0.3, 31, 0.02, &[0, 3000, 3000, 3000], 9).unwrap();
        for m in 1..=3 {
            for j in 1..6 {
                let mut prev = 0.0;
                for i in 0..=30 {
                    let s = k.survival(m, j, i as f64 * 0.01);
                    assert!(s + 1e-15 >= prev);
                    prev = s;
                }
            }
        }
    }
}
