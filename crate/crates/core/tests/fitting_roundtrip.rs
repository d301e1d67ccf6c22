use sipm_core::ensemble::Sequential;
use sipm_core::fitting::{compare_models, fit_histogram, FitConfig, Histogram};
use sipm_core::models::{epsilon_total, mc_measured_histogram, CrosstalkModelKind};
use sipm_core::sources::ThermalSource;
use sipm_core::{DetectorGeometry, DetectorParams, Error};

fn synthetic(eps: f64, eta: f64, seed: u64) -> Histogram {
    let counts = mc_measured_histogram(
        &Sequential,
        &ThermalSource::new(2.0 / eta).unwrap(),
        DetectorParams::new(eta, eps).unwrap(),
        &DetectorGeometry::default(),
        1_000_000,
        seed,
    )
    .unwrap();
    Histogram::new(counts).unwrap()
}

fn lattice_config(seed: u64) -> FitConfig {
    let mut cfg = FitConfig::new(CrosstalkModelKind::FullMc).with_seed(seed);
    cfg.mc_runs = 3_000_000;
    cfg
}

#[test]
fn round_trip_recovers_generator_parameters() {
    // efficiency 0.5 is folded into the fitted mean: 4 photons * 0.5 = 2
    let data = synthetic(0.05, 0.5, 71);
    let r = fit_histogram(&Sequential, &data, &lattice_config(5), &DetectorGeometry::default()).unwrap();
    assert!(r.mean_n.within(2.0, 3.0), "{r:?}");
    assert!(r.epsilon.within(0.05, 3.0), "{r:?}");
    assert!(!r.at_boundary());
    assert_eq!(r.dof, r.bins - 2);
}

#[test]
fn absolute_efficiency_from_known_flux() {
    let data = synthetic(0.02, 0.5, 72);
    let mut cfg = lattice_config(6);
    cfg.photon_flux = Some(4.0);
    let r = fit_histogram(&Sequential, &data, &cfg, &DetectorGeometry::default()).unwrap();
    let eta = r.eta.unwrap();
    assert!(eta.within(0.5, 3.0), "{eta:?}");
}

#[test]
fn no_crosstalk_data_bounds_epsilon() {
    let data = synthetic(0.0, 1.0, 73);
    let r = fit_histogram(&Sequential, &data, &lattice_config(7), &DetectorGeometry::default()).unwrap();
    assert!(r.epsilon.value + r.epsilon.sigma < 0.005, "{r:?}");
}

#[test]
fn fits_are_deterministic() {
    let data = synthetic(0.03, 1.0, 74);
    let g = DetectorGeometry::default();
    let configs = [lattice_config(8), FitConfig::new(CrosstalkModelKind::OneStage)];
    let a = compare_models(&Sequential, &data, &configs, &g).unwrap();
    let b = compare_models(&Sequential, &data, &configs, &g).unwrap();
    assert_eq!(a, b);
}

#[test]
fn weak_crosstalk_fits_every_model_and_rates_agree() {
    let data = synthetic(0.01, 1.0, 75);
    let g = DetectorGeometry::default();
    let configs: Vec<FitConfig> = vec![
        lattice_config(9),
        FitConfig::new(CrosstalkModelKind::OneStage),
        FitConfig::new(CrosstalkModelKind::Recursive),
    ];
    let results = compare_models(&Sequential, &data, &configs, &g).unwrap();
    let reduced: Vec<f64> = results.iter().map(|r| r.reduced_chi2()).collect();
    let (lo, hi) = (reduced[0], reduced[2]);
    assert!(hi / lo < 2.0, "{reduced:?}");

    let lattice = results.iter().find(|r| r.model == CrosstalkModelKind::FullMc).unwrap();
    let one = results.iter().find(|r| r.model == CrosstalkModelKind::OneStage).unwrap();
    let total = epsilon_total(lattice.epsilon.value).unwrap();
    // d(total)/d(eps_nn) = 4 (1 - eps_nn)^3
    let total_sigma = 4.0 * (1.0 - lattice.epsilon.value).powi(3) * lattice.epsilon.sigma;
    let combined = (total_sigma.powi(2) + one.epsilon.sigma.powi(2)).sqrt();
    assert!((total - one.epsilon.value).abs() < 2.0 * combined, "{total} vs {:?}", one.epsilon);
}

#[test]
fn strong_crosstalk_ranks_the_lattice_model_first() {
    let data = synthetic(0.078, 1.0, 76);
    let configs: Vec<FitConfig> = vec![
        FitConfig::new(CrosstalkModelKind::Recursive),
        lattice_config(10),
        FitConfig::new(CrosstalkModelKind::OneStage),
    ];
    let results = compare_models(&Sequential, &data, &configs, &DetectorGeometry::default()).unwrap();
    assert_eq!(results[0].model, CrosstalkModelKind::FullMc);
    for r in &results[1..] {
        assert!(r.reduced_chi2() > 2.0 * results[0].reduced_chi2(), "{results:?}");
    }
}

#[test]
fn degenerate_histogram_pins_mean_to_the_grid_minimum() {
    let data = Histogram::new(vec![1_000_000, 1, 1]).unwrap();
    let mut lattice = FitConfig::new(CrosstalkModelKind::FullMc);
    lattice.mc_runs = 100_000;
    let configs = [
        lattice,
        FitConfig::new(CrosstalkModelKind::OneStage),
        FitConfig::new(CrosstalkModelKind::Recursive),
    ];
    for r in compare_models(&Sequential, &data, &configs, &DetectorGeometry::default()).unwrap() {
        assert!(r.mean_n_at_boundary, "{r:?}");
        assert!((r.mean_n.value - 0.01).abs() < 1e-9);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let g = DetectorGeometry::default();
    assert_eq!(Histogram::new(vec![0, 0, 0]).unwrap_err(), Error::EmptyHistogram);
    let two = Histogram::new(vec![10, 0, 4]).unwrap();
    let cfg = FitConfig::new(CrosstalkModelKind::OneStage);
    assert_eq!(fit_histogram(&Sequential, &two, &cfg, &g).unwrap_err(), Error::TooFewBins { occupied: 2 });
    let mut cfg = FitConfig::new(CrosstalkModelKind::FullMc);
    cfg.mc_runs = 9_999;
    let ok = Histogram::new(vec![10, 5, 4]).unwrap();
    assert!(matches!(fit_histogram(&Sequential, &ok, &cfg, &g), Err(Error::TooFewRuns { .. })));
}
