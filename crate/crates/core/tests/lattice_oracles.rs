use proptest::prelude::*;
use sipm_core::ensemble::{run_ensemble, Sequential};
use sipm_core::lattice::{propagate_crosstalk, run_detection, run_fixed_seeds};
use sipm_core::metrics::fixed_seed_ensemble;
use sipm_core::rng::RngSeed;
use sipm_core::{CellState, DetectorGeometry, DetectorParams};

/// Expected crosstalk count from one uniformly placed seed to second order in
/// epsilon: first-wave neighbours plus two-step paths. On a bipartite lattice
/// a two-step path never ends on a neighbour of the seed, so distinct paths
/// reach distinct-or-shared second neighbours and the union bound is exact at
/// this order.
fn second_order_coefficients(g: &DetectorGeometry) -> (f64, f64) {
    let (mut first, mut second) = (0.0, 0.0);
    for s in 0..g.cells() {
        first += g.degree(s) as f64;
        second += g.neighbours(s).map(|b| (g.degree(b) - 1) as f64).sum::<f64>();
    }
    let n = g.cells() as f64;
    (first / n, second / n)
}

#[test]
fn mean_degree_is_three_point_six() {
    let (a, b) = second_order_coefficients(&DetectorGeometry::default());
    assert!((a - 3.6).abs() < 1e-12);
    // 4x4 interior seeds through 3-neighbour steps etc.; just a sanity range
    assert!(b > 9.0 && b < 12.0, "{b}");
}

#[test]
fn single_seed_small_epsilon_matches_branching_expansion() {
    let g = DetectorGeometry::default();
    let eps = 0.01;
    let (a, b) = second_order_coefficients(&g);
    let expected = a * eps + b * eps * eps;
    let s = fixed_seed_ensemble(&Sequential, 1, eps, 1_000_000, &g, 2024).unwrap();
    let ct = s.mean_crosstalk;
    // third-order paths: at most 4 * 3 * 3 of them
    let remainder = 36.0 * eps * eps * eps;
    assert!(
        (ct.value - expected).abs() <= 4.0 * ct.sigma + remainder,
        "mc {ct:?} vs expansion {expected}"
    );
    assert!(ct.value >= 3.6 * eps && ct.value <= 3.6 * eps * 1.15, "{ct:?}");
}

#[test]
fn half_probability_single_seed_spreads_over_a_third_of_the_array() {
    let g = DetectorGeometry::default();
    let s = fixed_seed_ensemble(&Sequential, 1, 0.5, 100_000, &g, 11).unwrap();
    assert!((s.mean_crosstalk.value - 34.0).abs() < 3.4, "{:?}", s.mean_crosstalk);
}

#[test]
fn run_ensemble_is_reproducible() {
    let g = DetectorGeometry::default();
    let run = |sim: &mut sipm_core::Simulator, rng: &mut sipm_core::rng::RunRng| sim.run_fixed_seeds(5, 0.1, rng).unwrap();
    let a = run_ensemble(&Sequential, &g, 42, 5000, run);
    let b = run_ensemble(&Sequential, &g, 42, 5000, run);
    assert_eq!(a, b);
}

fn geometry_strategy() -> impl Strategy<Value = DetectorGeometry> {
    (1usize..12, 1usize..12).prop_map(|(r, c)| DetectorGeometry::new(r, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fired_cells_are_consistent(g in geometry_strategy(), frac in 0.0f64..1.0, eps in 0.0f64..=1.0, seed in any::<u64>()) {
        let n_trg = 1 + ((g.cells() - 1) as f64 * frac) as usize;
        let mut rng = RngSeed::new(seed, 0).rng();
        let out = run_fixed_seeds(n_trg, &g, eps, &mut rng).unwrap();
        let grid = out.grid.as_ref().unwrap();
        prop_assert_eq!(out.n_seed, n_trg);
        prop_assert_eq!(out.n_fired, out.n_seed + out.n_crosstalk);
        prop_assert!(out.n_fired <= g.cells());
        prop_assert_eq!(grid.count(|s| *s == CellState::Seed), out.n_seed);
        prop_assert_eq!(grid.count(|s| matches!(s, CellState::Crosstalk { .. })), out.n_crosstalk);
        prop_assert_eq!(out.n_stages == 0, out.n_crosstalk == 0);
        // every crosstalk cell of wave k > 1 touches a cell of wave k - 1
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                if let CellState::Crosstalk { stage } = grid.get(r, c) {
                    prop_assert!(stage as usize <= out.n_stages);
                    let parent = g.neighbours(g.index(r, c)).any(|b| {
                        let (br, bc) = g.coords(b);
                        match grid.get(br, bc) {
                            CellState::Seed => stage == 1,
                            CellState::Crosstalk { stage: s } => s + 1 == stage,
                            CellState::Untriggered => false,
                        }
                    });
                    prop_assert!(parent);
                }
            }
        }
    }

    #[test]
    fn detection_never_exceeds_photons_or_cells(n in 0u64..300, eta in 0.0f64..=1.0, eps in 0.0f64..0.3, seed in any::<u64>()) {
        let g = DetectorGeometry::default();
        let mut rng = RngSeed::new(seed, 0).rng();
        let out = run_detection(n, &g, DetectorParams::new(eta, eps).unwrap(), &mut rng);
        prop_assert!(out.n_seed as u64 <= n);
        prop_assert!(out.n_fired <= 100);
        prop_assert_eq!(out.n_photons, n);
    }

    #[test]
    fn full_probability_fires_the_whole_component(g in geometry_strategy(), cell in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let s = cell.index(g.cells());
        let rng = RngSeed::new(seed, 0).rng();
        let out = propagate_crosstalk(&[s], &g, 1.0, &rng).unwrap();
        prop_assert_eq!(out.n_fired, g.cells());
        prop_assert_eq!(out.n_stages, g.eccentricity(s));
    }
}
