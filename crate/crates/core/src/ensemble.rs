//! Ensemble execution.
//!
//! Runs are grouped into fixed batches of [`BATCH`] consecutive run indices.
//! Each batch folds its runs sequentially into an accumulator and the
//! accumulators come back in batch order, so any reduction the caller does
//! afterwards sees the same operands in the same order no matter how many
//! threads executed the batches.

use alloc::vec::Vec;

use crate::lattice::{DetectorGeometry, RunOutcome, Simulator};
use crate::rng::{RunRng, StreamKey};
use crate::stats::{FloatMoments, IntMoments};

pub const BATCH: u64 = 2048;

/// Something that can evaluate independent batches, possibly in parallel.
pub trait Executor: Sync {
    /// Returns `[f(0), f(1), ..., f(batches - 1)]`, in that order.
    fn map_batches<T, F>(&self, batches: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every batch on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_batches<T, F>(&self, batches: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..batches).map(f).collect()
    }
}

/// Folds run indices `0..runs` batch by batch; returns one accumulator per
/// batch, in batch order.
pub fn fold_runs<E, A, I, S>(exec: &E, runs: u64, init: I, step: S) -> Vec<A>
where
    E: Executor + ?Sized,
    A: Send,
    I: Fn() -> A + Sync + Send,
    S: Fn(&mut A, u64) + Sync + Send,
{
    let batches = runs.div_ceil(BATCH) as usize;
    exec.map_batches(batches, |b| {
        let start = b as u64 * BATCH;
        let end = (start + BATCH).min(runs);
        let mut acc = init();
        for run in start..end {
            step(&mut acc, run);
        }
        acc
    })
}

/// Moments of the per-run observables of an ensemble.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub crosstalk: IntMoments,
    pub stages: IntMoments,
    pub fired: IntMoments,
    pub seeds: IntMoments,
    /// n_fired / n_seed over runs with at least one seed.
    pub cluster: FloatMoments,
}

impl RunStats {
    #[inline]
    pub fn push(&mut self, out: &RunOutcome) {
        self.crosstalk.push(out.n_crosstalk as u64);
        self.stages.push(out.n_stages as u64);
        self.fired.push(out.n_fired as u64);
        self.seeds.push(out.n_seed as u64);
        if out.n_seed > 0 {
            self.cluster.push(out.n_fired as f64 / out.n_seed as f64);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.crosstalk.merge(&other.crosstalk);
        self.stages.merge(&other.stages);
        self.fired.merge(&other.fired);
        self.seeds.merge(&other.seeds);
        self.cluster.merge(&other.cluster);
    }

    pub fn runs(&self) -> u64 {
        self.fired.count
    }
}

/// Runs `runs` independent pulses on `geometry`, run `r` drawing from stream
/// `r` of `seed`, and returns their merged statistics.
pub fn run_ensemble<E, F>(exec: &E, geometry: &DetectorGeometry, seed: u64, runs: u64, run: F) -> RunStats
where
    E: Executor + ?Sized,
    F: Fn(&mut Simulator, &mut RunRng) -> RunOutcome + Sync + Send,
{
    let key = StreamKey::new(seed);
    let parts = fold_runs(
        exec,
        runs,
        || (Simulator::new(*geometry), RunStats::default()),
        |(sim, stats), r| {
            let mut rng = key.stream(r);
            let out = run(sim, &mut rng);
            stats.push(&out);
        },
    );
    let mut total = RunStats::default();
    for (_, part) in &parts {
        total.merge(part);
    }
    total
}

/// Histogram of `n_fired` over an ensemble, indexed by fired count.
pub fn fired_histogram<E, F>(exec: &E, geometry: &DetectorGeometry, seed: u64, runs: u64, run: F) -> Vec<u64>
where
    E: Executor + ?Sized,
    F: Fn(&mut Simulator, &mut RunRng) -> RunOutcome + Sync + Send,
{
    let key = StreamKey::new(seed);
    let cells = geometry.cells();
    let parts = fold_runs(
        exec,
        runs,
        || (Simulator::new(*geometry), alloc::vec![0u64; cells + 1]),
        |(sim, counts), r| {
            let mut rng = key.stream(r);
            let out = run(sim, &mut rng);
            counts[out.n_fired] += 1;
        },
    );
    let mut total = alloc::vec![0u64; cells + 1];
    for (_, part) in &parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Executes batches in reverse to show the result does not depend on
    /// evaluation order.
    struct Reversed;

    impl Executor for Reversed {
        fn map_batches<T, F>(&self, batches: usize, f: F) -> Vec<T>
        where
            T: Send,
            F: Fn(usize) -> T + Sync + Send,
        {
            let mut out: Vec<(usize, T)> = (0..batches).rev().map(|b| (b, f(b))).collect();
            out.sort_by_key(|(b, _)| *b);
            out.into_iter().map(|(_, t)| t).collect()
        }
    }

    #[test]
    fn evaluation_order_does_not_matter() {
        let g = DetectorGeometry::default();
        let run = |sim: &mut Simulator, rng: &mut RunRng| sim.run_fixed_seeds(3, 0.2, rng).unwrap();
        let a = run_ensemble(&Sequential, &g, 5, 10_000, run);
        let b = run_ensemble(&Reversed, &g, 5, 10_000, run);
        assert_eq!(a, b);
        assert_eq!(a.runs(), 10_000);
    }

    #[test]
    fn fold_covers_every_run_once() {
        let parts = fold_runs(&Sequential, 5000, || 0u64, |acc, r| *acc += r);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts.iter().sum::<u64>(), 4999 * 5000 / 2);
    }
}
