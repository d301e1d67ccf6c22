use serde::Serialize;
use sipm_core::ensemble::Executor;
use sipm_core::metrics::{
    cluster_size_curve, critical_triggers, ct_curve, linearity_threshold, saturation_curve, stage_curve, SweepResult,
};
use sipm_core::models::{exact_occupancy_mean, mc_measured_histogram};
use sipm_core::DetectorParams;

use super::Outputs;
use crate::config::{RunConfig, Sweep, SweepConfig};
use crate::error::CliResult;
use crate::io::{csv_header, csv_row, json_artifact, Artifact, Format};

const ROLE: &str = "sweep";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Fixed-trigger curves: one row per trigger count, a mean and a standard
/// error column per crosstalk probability.
fn trigger_table(curve: &SweepResult, header: &str) -> String {
    let mut out = String::from("n_trg");
    for s in &curve.series {
        out.push_str(&format!(",mean_eps_{0},stderr_eps_{0}", s.key));
    }
    out.push('\n');
    for (i, x) in curve.x_values.iter().enumerate() {
        let mut row = vec![x.to_string()];
        for s in 0..curve.series.len() {
            let v = curve.value(s, i);
            row.push(v.value.to_string());
            row.push(v.sigma.to_string());
        }
        csv_row(&mut out, row);
    }
    format!("{header}{out}")
}

fn artifact<R: Serialize>(format: Format, record: &RunConfig, csv: impl FnOnce(String) -> String, result: &R) -> Artifact {
    match format {
        Format::Csv => Artifact {
            role: ROLE,
            bytes: csv(csv_header(ROLE, record)).into_bytes(),
        },
        Format::Json => json_artifact(ROLE, record, result),
    }
}

pub fn sweep<E: Executor>(config: &SweepConfig, record: &RunConfig, exec: &E) -> CliResult<Outputs> {
    let (g, runs, seed) = (&config.geometry, config.runs, config.seed);
    let (text, art) = match &config.sweep {
        Sweep::Ct { n_trg, epsilon_nn } | Sweep::Cluster { n_trg, epsilon_nn } | Sweep::Stages { n_trg, epsilon_nn } => {
            let curve = match &config.sweep {
                Sweep::Ct { .. } => ct_curve(exec, n_trg, epsilon_nn, runs, g, seed)?,
                Sweep::Cluster { .. } => cluster_size_curve(exec, n_trg, epsilon_nn, runs, g, seed)?,
                _ => stage_curve(exec, n_trg, epsilon_nn, runs, g, seed)?,
            };
            let text = format!(
                "{} sweep: {} trigger counts x {} crosstalk values, {} runs each\n",
                config.sweep.name(),
                n_trg.len(),
                epsilon_nn.len(),
                runs
            );
            (text, artifact(config.format, record, |h| trigger_table(&curve, &h), &curve))
        }
        Sweep::Critical { epsilon_nn } => {
            let results = epsilon_nn
                .iter()
                .map(|&e| critical_triggers(exec, e, runs, g, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let mut text = String::new();
            for r in &results {
                let mark = if r.reached { "" } else { " (not reached)" };
                text.push_str(&format!("epsilon_nn {}: critical triggers {}{}\n", r.epsilon_nn, r.critical, mark));
            }
            let csv = |mut out: String| {
                out.push_str("epsilon_nn,critical,reached,baseline,baseline_stderr,at_critical,at_critical_stderr\n");
                for r in &results {
                    csv_row(
                        &mut out,
                        [
                            r.epsilon_nn.to_string(),
                            r.critical.to_string(),
                            r.reached.to_string(),
                            r.baseline.value.to_string(),
                            r.baseline.sigma.to_string(),
                            r.at_critical.value.to_string(),
                            r.at_critical.sigma.to_string(),
                        ],
                    );
                }
                out
            };
            (text, artifact(config.format, record, csv, &results))
        }
        Sweep::Saturation {
            eta,
            n_photons,
            epsilon_nn,
        } => {
            let curve = saturation_curve(exec, eta, n_photons, *epsilon_nn, runs, g, seed)?;
            let cells = g.cells();
            let csv = |mut out: String| {
                out.push_str("eta");
                for n in n_photons {
                    out.push_str(&format!(",mean_n_{n},stderr_n_{n},occupancy_n_{n}"));
                }
                out.push('\n');
                for (i, &e) in eta.iter().enumerate() {
                    let mut row = vec![e.to_string()];
                    for (s, &n) in n_photons.iter().enumerate() {
                        let v = curve.value(s, i);
                        row.push(v.value.to_string());
                        row.push(v.sigma.to_string());
                        row.push(exact_occupancy_mean(e, n, cells).map(|x| x.to_string()).unwrap_or_default());
                    }
                    csv_row(&mut out, row);
                }
                out
            };
            let text = format!(
                "saturation sweep: {} efficiencies x {} photon numbers, {} runs each\n",
                eta.len(),
                n_photons.len(),
                runs
            );
            (text, artifact(config.format, record, csv, &curve))
        }
        Sweep::Linearity { n_photons, eta } => {
            let results = n_photons
                .iter()
                .map(|&n| linearity_threshold(exec, n, eta, runs, g, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let mut text = String::new();
            for r in &results {
                match r.occupancy {
                    Some(o) => text.push_str(&format!("{} photons: 10% deviation at occupancy {}\n", r.n_photons, o)),
                    None => text.push_str(&format!("{} photons: 10% deviation not reached\n", r.n_photons)),
                }
            }
            let csv = |mut out: String| {
                out.push_str("n_photons,occupancy,eta,ratio,ratio_stderr\n");
                for r in &results {
                    csv_row(
                        &mut out,
                        [
                            r.n_photons.to_string(),
                            opt(r.occupancy),
                            opt(r.eta),
                            r.ratio.value.to_string(),
                            r.ratio.sigma.to_string(),
                        ],
                    );
                }
                out
            };
            (text, artifact(config.format, record, csv, &results))
        }
        Sweep::Histogram {
            source,
            eta,
            epsilon_nn,
        } => {
            let params = DetectorParams::new(*eta, *epsilon_nn)?;
            let mut counts = mc_measured_histogram(exec, source, params, g, runs, seed)?;
            while counts.len() > 1 && counts.last() == Some(&0) {
                counts.pop();
            }
            let csv = |mut out: String| {
                out.push_str("n,count\n");
                for (n, c) in counts.iter().enumerate() {
                    csv_row(&mut out, [n as u64, *c]);
                }
                out
            };
            #[derive(Serialize)]
            struct Counts<'a> {
                counts: &'a [u64],
            }
            let text = format!("histogram: {} pulses, counts 0..={}\n", runs, counts.len() - 1);
            (text, artifact(config.format, record, csv, &Counts { counts: &counts }))
        }
    };
    Ok(Outputs {
        text,
        artifacts: vec![art],
    })
}
