use serde::Serialize;
use sipm_core::ensemble::Executor;
use sipm_core::fitting::{FitResult, Fitter, Histogram, OverlayPoint};

use super::Outputs;
use crate::config::{FitRunConfig, RunConfig};
use crate::error::CliResult;
use crate::io::{csv_header, csv_row, json_artifact, Artifact, Format};

fn describe(r: &FitResult) -> String {
    let mut line = format!(
        "{:<10} mean_n = {:.5} +- {:.5}  epsilon = {:.5} +- {:.5}  chi2/dof = {:.2}/{} = {:.3}",
        r.model.name(),
        r.mean_n.value,
        r.mean_n.sigma,
        r.epsilon.value,
        r.epsilon.sigma,
        r.chi2,
        r.dof,
        r.reduced_chi2()
    );
    if let Some(eta) = r.eta {
        line.push_str(&format!("  eta = {:.5} +- {:.5}", eta.value, eta.sigma));
    }
    if r.mean_n_at_boundary {
        line.push_str("  [mean_n at range edge]");
    }
    if r.epsilon_at_boundary {
        line.push_str("  [epsilon at range edge]");
    }
    line.push('\n');
    line
}

#[derive(Serialize)]
struct OverlayColumn<'a> {
    model: &'static str,
    points: &'a [OverlayPoint],
}

/// Fits every configured model; results are ordered by reduced chi-square.
/// The overlay table keeps the configured model order.
pub fn fit<E: Executor>(config: &FitRunConfig, record: &RunConfig, exec: &E) -> CliResult<Outputs> {
    let data = Histogram::new(config.counts.clone())?;
    let mut fits: Vec<(FitResult, Vec<OverlayPoint>)> = Vec::with_capacity(config.fits.len());
    for cfg in &config.fits {
        let fitter = Fitter::new(exec, &data, cfg.clone(), &config.geometry)?;
        let result = fitter.fit(exec)?;
        let overlay = fitter.overlay(&result)?;
        fits.push((result, overlay));
    }

    let overlay = match config.overlay_format {
        Format::Csv => {
            let mut out = csv_header("overlay", record);
            out.push_str("n,data");
            for (r, _) in &fits {
                out.push(',');
                out.push_str(r.model.name());
            }
            out.push('\n');
            for n in 0..=data.max_count() {
                let mut row = vec![n.to_string(), data.probability(n).to_string()];
                for (_, points) in &fits {
                    row.push(points.get(n).map(|p| p.model.to_string()).unwrap_or_default());
                }
                csv_row(&mut out, row);
            }
            Artifact {
                role: "overlay",
                bytes: out.into_bytes(),
            }
        }
        Format::Json => {
            let columns: Vec<OverlayColumn> = fits
                .iter()
                .map(|(r, p)| OverlayColumn {
                    model: r.model.name(),
                    points: p,
                })
                .collect();
            json_artifact("overlay", record, &columns)
        }
    };

    let mut results: Vec<FitResult> = fits.into_iter().map(|(r, _)| r).collect();
    results.sort_by(|a, b| a.reduced_chi2().total_cmp(&b.reduced_chi2()));
    let mut text = format!("{} pulses, counts 0..={}\n", data.total(), data.max_count());
    for r in &results {
        text.push_str(&describe(r));
    }
    Ok(Outputs {
        text,
        artifacts: vec![json_artifact("fit", record, &results), overlay],
    })
}
