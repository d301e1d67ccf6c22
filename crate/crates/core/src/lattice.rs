//! Detector lattice and the trigger/crosstalk process of a single pulse.
//!
//! A run has two phases. Photons are placed first: each photon fires with
//! probability `eta` and lands on a uniformly chosen cell; a cell that is
//! already fired absorbs further photons. Crosstalk then spreads in
//! synchronous waves. Cells fired in wave `k - 1` (wave 0 being the seeds)
//! each make one Bernoulli(`epsilon_nn`) attempt on every neighbour that is
//! still untriggered, and a neighbour joins wave `k` if any attempt on it
//! succeeds. The run stops at the first wave that fires nothing.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::rng::{threshold, RunRng, EDGE_REGION};

const NONE: u32 = u32::MAX;
const UNTRIGGERED: u32 = u32::MAX;
const CHUNK_WORDS: usize = 64;

/// Rectangular array of cells with open boundaries and 4-neighbour
/// (von Neumann) connectivity. Cells are indexed row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectorGeometry {
    rows: usize,
    cols: usize,
}

impl Default for DetectorGeometry {
    /// 10x10, the size of a typical 100-element device.
    fn default() -> Self {
        Self { rows: 10, cols: 10 }
    }
}

impl DetectorGeometry {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.checked_mul(cols).is_none_or(|n| n >= NONE as usize) {
            return Err(Error::EmptyGeometry { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Neighbour slots in row-major order: up, left, right, down.
    pub fn neighbour_slots(&self, index: usize) -> [Option<usize>; 4] {
        let (r, c) = self.coords(index);
        [
            (r > 0).then(|| index - self.cols),
            (c > 0).then(|| index - 1),
            (c + 1 < self.cols).then(|| index + 1),
            (r + 1 < self.rows).then(|| index + self.cols),
        ]
    }

    pub fn neighbours(&self, index: usize) -> impl Iterator<Item = usize> {
        self.neighbour_slots(index).into_iter().flatten()
    }

    pub fn degree(&self, index: usize) -> usize {
        self.neighbours(index).count()
    }

    /// Number of ordered (cell, neighbour) pairs.
    pub fn directed_pairs(&self) -> usize {
        2 * (self.rows * (self.cols - 1) + self.cols * (self.rows - 1))
    }

    /// Mean number of neighbours per cell (3.6 on 10x10).
    pub fn mean_degree(&self) -> f64 {
        self.directed_pairs() as f64 / self.cells() as f64
    }

    /// Largest Manhattan distance from `index` to any cell.
    pub fn eccentricity(&self, index: usize) -> usize {
        let (r, c) = self.coords(index);
        r.max(self.rows - 1 - r) + c.max(self.cols - 1 - c)
    }
}

/// Detection efficiency and per-neighbour crosstalk probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectorParams {
    eta: f64,
    epsilon_nn: f64,
}

impl DetectorParams {
    pub fn new(eta: f64, epsilon_nn: f64) -> Result<Self> {
        check_probability("eta", eta)?;
        check_probability("epsilon_nn", epsilon_nn)?;
        Ok(Self { eta, epsilon_nn })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilon_nn(&self) -> f64 {
        self.epsilon_nn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum CellState {
    Untriggered,
    Seed,
    /// Fired by crosstalk in the given wave (1-based).
    Crosstalk { stage: u32 },
}

/// Per-cell snapshot of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<CellState>,
}

impl Grid {
    pub fn get(&self, row: usize, col: usize) -> CellState {
        self.cells[row * self.cols + col]
    }

    pub fn count(&self, pred: impl Fn(&CellState) -> bool) -> usize {
        self.cells.iter().filter(|s| pred(s)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunOutcome {
    /// Impinging photons; 0 when seeds were placed directly.
    pub n_photons: u64,
    pub n_seed: usize,
    pub n_crosstalk: usize,
    pub n_stages: usize,
    pub n_fired: usize,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub grid: Option<Grid>,
}

/// Reusable single-run engine. All buffers are sized once for the geometry
/// and cleared incrementally, so an ensemble allocates per batch rather than
/// per run.
#[derive(Debug, Clone)]
pub struct Simulator {
    geometry: DetectorGeometry,
    neighbours: Vec<[u32; 4]>,
    /// `UNTRIGGERED`, 0 for seeds, or the crosstalk wave.
    state: Vec<u32>,
    /// Fired cells in firing order, seeds first.
    fired: Vec<u32>,
    n_seed: usize,
    n_stages: usize,
    n_photons: u64,
    frontier: Vec<u32>,
    next: Vec<u32>,
    perm: Vec<u32>,
    swaps: Vec<u32>,
    edge_words: Vec<u32>,
    chunk_loaded: Vec<bool>,
    loaded: Vec<u32>,
    edge_rng: Option<RunRng>,
}

impl Simulator {
    pub fn new(geometry: DetectorGeometry) -> Self {
        let cells = geometry.cells();
        let neighbours = (0..cells)
            .map(|i| geometry.neighbour_slots(i).map(|s| s.map_or(NONE, |j| j as u32)))
            .collect();
        let chunks = (4 * cells).div_ceil(CHUNK_WORDS);
        Self {
            geometry,
            neighbours,
            state: vec![UNTRIGGERED; cells],
            fired: Vec::with_capacity(cells),
            n_seed: 0,
            n_stages: 0,
            n_photons: 0,
            frontier: Vec::with_capacity(cells),
            next: Vec::with_capacity(cells),
            perm: (0..cells as u32).collect(),
            swaps: Vec::new(),
            edge_words: vec![0; chunks * CHUNK_WORDS],
            chunk_loaded: vec![false; chunks],
            loaded: Vec::new(),
            edge_rng: None,
        }
    }

    pub fn geometry(&self) -> &DetectorGeometry {
        &self.geometry
    }

    pub fn reset(&mut self) {
        for &cell in &self.fired {
            self.state[cell as usize] = UNTRIGGERED;
        }
        self.fired.clear();
        for &chunk in &self.loaded {
            self.chunk_loaded[chunk as usize] = false;
        }
        self.loaded.clear();
        self.edge_rng = None;
        self.n_seed = 0;
        self.n_stages = 0;
        self.n_photons = 0;
    }

    /// Places `n_photons` photons and marks the cells they fire as seeds.
    /// Returns the number of distinct seeds.
    pub fn place_photons(&mut self, n_photons: u64, eta: f64, rng: &mut RunRng) -> Result<usize> {
        check_probability("eta", eta)?;
        self.reset();
        self.n_photons = n_photons;
        if eta == 0.0 {
            return Ok(0);
        }
        let cells = self.geometry.cells() as u32;
        for _ in 0..n_photons {
            if !rng.random_bool(eta) {
                continue;
            }
            let cell = rng.random_range(0..cells);
            self.mark_seed(cell);
        }
        self.n_seed = self.fired.len();
        Ok(self.n_seed)
    }

    /// Marks `n_trg` distinct cells, chosen uniformly without replacement,
    /// as seeds. The first `k` seeds of a stream do not depend on `n_trg`.
    pub fn place_distinct(&mut self, n_trg: usize, rng: &mut RunRng) -> Result<()> {
        let cells = self.geometry.cells();
        if n_trg > cells {
            return Err(Error::TooManySeeds {
                requested: n_trg,
                cells,
            });
        }
        self.reset();
        self.swaps.clear();
        for i in 0..n_trg {
            let j = rng.random_range(i as u32..cells as u32);
            self.perm.swap(i, j as usize);
            self.swaps.push(j);
            let cell = self.perm[i];
            self.mark_seed(cell);
        }
        // restore the identity permutation
        for (i, &j) in self.swaps.iter().enumerate().rev() {
            self.perm.swap(i, j as usize);
        }
        self.n_seed = n_trg;
        Ok(())
    }

    /// Marks the given cells as seeds.
    pub fn place_cells(&mut self, cells: &[usize]) -> Result<()> {
        let total = self.geometry.cells();
        self.reset();
        for &cell in cells {
            if cell >= total {
                self.reset();
                return Err(Error::CellOutOfRange { index: cell, cells: total });
            }
            if self.state[cell] != UNTRIGGERED {
                self.reset();
                return Err(Error::DuplicateSeed { index: cell });
            }
            self.mark_seed(cell as u32);
        }
        self.n_seed = self.fired.len();
        Ok(())
    }

    #[inline]
    fn mark_seed(&mut self, cell: u32) {
        let s = &mut self.state[cell as usize];
        if *s == UNTRIGGERED {
            *s = 0;
            self.fired.push(cell);
        }
    }

    /// Runs the crosstalk waves from the current seeds. `rng` only selects
    /// the stream; attempts read their own fixed positions in it.
    pub fn propagate(&mut self, epsilon_nn: f64, rng: &RunRng) -> Result<()> {
        check_probability("epsilon_nn", epsilon_nn)?;
        let thr = threshold(epsilon_nn);
        if thr == 0 || self.fired.is_empty() {
            return Ok(());
        }
        let certain = thr == 1 << 32;
        if !certain {
            self.edge_rng = Some(rng.clone());
        }
        let mut frontier = core::mem::take(&mut self.frontier);
        let mut next = core::mem::take(&mut self.next);
        frontier.clear();
        frontier.extend_from_slice(&self.fired);
        let mut stage = 0u32;
        loop {
            next.clear();
            for &a in &frontier {
                let slots = self.neighbours[a as usize];
                for (d, &b) in slots.iter().enumerate() {
                    if b == NONE || self.state[b as usize] != UNTRIGGERED {
                        continue;
                    }
                    if !certain && u64::from(self.edge_word(a as usize * 4 + d)) >= thr {
                        continue;
                    }
                    self.state[b as usize] = stage + 1;
                    next.push(b);
                }
            }
            if next.is_empty() {
                break;
            }
            stage += 1;
            self.fired.extend_from_slice(&next);
            core::mem::swap(&mut frontier, &mut next);
        }
        self.n_stages = stage as usize;
        self.frontier = frontier;
        self.next = next;
        Ok(())
    }

    #[inline]
    fn edge_word(&mut self, word: usize) -> u32 {
        let chunk = word / CHUNK_WORDS;
        if !self.chunk_loaded[chunk] {
            let rng = self
                .edge_rng
                .as_mut()
                .expect("edge stream is set before attempts are drawn");
            rng.set_word_pos(EDGE_REGION + (chunk * CHUNK_WORDS) as u128);
            let base = chunk * CHUNK_WORDS;
            for w in &mut self.edge_words[base..base + CHUNK_WORDS] {
                *w = rng.next_u32();
            }
            self.chunk_loaded[chunk] = true;
            self.loaded.push(chunk as u32);
        }
        self.edge_words[word]
    }

    /// Outcome of the current run.
    pub fn outcome(&self, with_grid: bool) -> RunOutcome {
        RunOutcome {
            n_photons: self.n_photons,
            n_seed: self.n_seed,
            n_crosstalk: self.fired.len() - self.n_seed,
            n_stages: self.n_stages,
            n_fired: self.fired.len(),
            grid: with_grid.then(|| self.grid()),
        }
    }

    pub fn grid(&self) -> Grid {
        let cells = self
            .state
            .iter()
            .map(|&s| match s {
                UNTRIGGERED => CellState::Untriggered,
                0 => CellState::Seed,
                k => CellState::Crosstalk { stage: k },
            })
            .collect();
        Grid {
            rows: self.geometry.rows,
            cols: self.geometry.cols,
            cells,
        }
    }

    /// Seed cells of the current run, sorted.
    pub fn seeds(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.fired[..self.n_seed].iter().map(|&c| c as usize).collect();
        s.sort_unstable();
        s
    }

    pub fn n_fired(&self) -> usize {
        self.fired.len()
    }

    pub fn run_fixed_seeds(&mut self, n_trg: usize, epsilon_nn: f64, rng: &mut RunRng) -> Result<RunOutcome> {
        self.place_distinct(n_trg, rng)?;
        self.propagate(epsilon_nn, rng)?;
        Ok(self.outcome(false))
    }

    pub fn run_detection(&mut self, n_photons: u64, params: DetectorParams, rng: &mut RunRng) -> RunOutcome {
        // parameters are validated on construction
        let _ = self.place_photons(n_photons, params.eta, rng);
        let _ = self.propagate(params.epsilon_nn, rng);
        self.outcome(false)
    }
}

/// Distinct cells fired by `n_photons` photons, sorted.
pub fn place_photons(n_photons: u64, geometry: &DetectorGeometry, eta: f64, rng: &mut RunRng) -> Result<Vec<usize>> {
    let mut sim = Simulator::new(*geometry);
    sim.place_photons(n_photons, eta, rng)?;
    Ok(sim.seeds())
}

/// Crosstalk percolation from an explicit seed set. The outcome carries the
/// grid snapshot.
pub fn propagate_crosstalk(
    seeds: &[usize],
    geometry: &DetectorGeometry,
    epsilon_nn: f64,
    rng: &RunRng,
) -> Result<RunOutcome> {
    let mut sim = Simulator::new(*geometry);
    sim.place_cells(seeds)?;
    sim.propagate(epsilon_nn, rng)?;
    Ok(sim.outcome(true))
}

/// `n_trg` uniformly chosen distinct seeds followed by crosstalk.
pub fn run_fixed_seeds(
    n_trg: usize,
    geometry: &DetectorGeometry,
    epsilon_nn: f64,
    rng: &mut RunRng,
) -> Result<RunOutcome> {
    if n_trg == 0 {
        return Err(Error::Invalid("n_trg must be at least 1"));
    }
    let mut sim = Simulator::new(*geometry);
    sim.place_distinct(n_trg, rng)?;
    sim.propagate(epsilon_nn, rng)?;
    Ok(sim.outcome(true))
}

/// Photon placement followed by crosstalk.
pub fn run_detection(
    n_photons: u64,
    geometry: &DetectorGeometry,
    params: DetectorParams,
    rng: &mut RunRng,
) -> RunOutcome {
    let mut sim = Simulator::new(*geometry);
    sim.run_detection(n_photons, params, rng);
    sim.outcome(true)
}
