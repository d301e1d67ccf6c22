use std::path::Path;
use std::process::Command;

use clap::Parser;
use sipm::{run, Cli, CliError};
use tempfile::TempDir;

fn sipm(args: &[&str]) -> Result<String, CliError> {
    let cli = Cli::try_parse_from(std::iter::once("sipm").chain(args.iter().copied())).expect("valid arguments");
    let mut out = Vec::new();
    run(cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sipm")).args(args).output().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn single_trigger_without_crosstalk_marks_one_cell() {
    let out = sipm(&["simulate", "--seed-cell", "3,4", "--seed", "1"]).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[3], ". . . . X . . . . .");
    assert_eq!(out.matches('X').count(), 1);
    assert!(out.contains("crosstalks: 0, stages: 0"), "{out}");
}

#[test]
fn certain_crosstalk_from_a_corner_fires_everything() {
    let out = sipm(&["simulate", "--seed-cell", "0,0", "--epsilon-nn", "1", "--seed", "7"]).unwrap();
    assert!(!out.contains('.'));
    assert!(out.contains("crosstalks: 99, stages: 18"), "{out}");
    assert!(out.starts_with("X 1 2 3"), "{out}");
}

#[test]
fn simulate_requires_exactly_one_placement() {
    assert!(Cli::try_parse_from(["sipm", "simulate"]).is_err());
    assert!(Cli::try_parse_from(["sipm", "simulate", "--n-trg", "3", "--photons", "4"]).is_err());
    let out = binary(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn header_only_histogram_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let h = path(&dir, "h.csv");
    std::fs::write(&h, "n,count\n").unwrap();
    let out = binary(&["fit", "--histogram", &h]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no data rows"), "{err}");
}

#[test]
fn missing_histogram_is_an_io_error() {
    let out = binary(&["fit", "--histogram", "/nonexistent/h.csv"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn invalid_probability_is_a_numerical_error() {
    let out = binary(&["simulate", "--n-trg", "2", "--epsilon-nn", "1.5", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn full_crosstalk_curve_is_exact() {
    let out = sipm(&["sweep", "--kind", "ct", "--n-trg", "1:100:9", "--epsilon-nn", "1", "--runs", "50", "--seed", "2"]).unwrap();
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert_eq!(r[1], 100.0 - r[0]);
        assert_eq!(r[2], 0.0);
    }
}

#[test]
fn saturation_sweep_follows_occupancy_formula() {
    let out = sipm(&["sweep", "--kind", "saturation", "--eta", "0.2,0.6,1", "--photons", "20,100", "--runs", "20000", "--seed", "4"]).unwrap();
    for r in data_rows(&out) {
        let eta = r[0];
        for (k, n_ph) in [20.0, 100.0].into_iter().enumerate() {
            let (mean, se) = (r[1 + 3 * k], r[2 + 3 * k]);
            let expect = 100.0 * (1.0 - (1.0 - eta / 100.0f64).powf(n_ph));
            assert!((mean - expect).abs() <= 3.0 * se + 1e-9, "eta {eta} N {n_ph}: {mean} vs {expect}");
        }
    }
}

fn replay_is_identical(file: &str) {
    let out = sipm(&["replay", "--check", file]).unwrap();
    assert!(out.ends_with("identical\n"), "{out}");
}

#[test]
fn replay_reproduces_csv_and_json_bytes() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "ct.csv");
    let json = path(&dir, "ct.json");
    let sim = path(&dir, "sim.json");
    sipm(&["sweep", "--kind", "stages", "--n-trg", "1,5,20", "--epsilon-nn", "0.07", "--runs", "500", "--output", &csv]).unwrap();
    sipm(&["sweep", "--kind", "critical", "--epsilon-nn", "0.05", "--runs", "200", "--format", "json", "--output", &json]).unwrap();
    sipm(&["simulate", "--source", "thermal:3", "--epsilon-nn", "0.2", "--output", &sim]).unwrap();
    for f in [&csv, &json, &sim] {
        replay_is_identical(f);
    }
    let regenerated = path(&dir, "again.csv");
    sipm(&["replay", &csv, "--output", &regenerated]).unwrap();
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&regenerated).unwrap());
}

#[test]
fn tampered_output_fails_replay_check() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "lin.csv");
    sipm(&["sweep", "--kind", "linearity", "--eta", "0.1:1:0.1", "--runs", "300", "--seed", "9", "--output", &csv]).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let last = text.lines().last().unwrap().to_string();
    std::fs::write(&csv, text.replace(&last, &format!("{last}0"))).unwrap();
    let out = binary(&["replay", "--check", &csv]);
    assert_eq!(out.status.code(), Some(1));
}

fn fit_json(dir: &TempDir, hist: &str, extra: &[&str]) -> serde_json::Value {
    let out = path(dir, "fit.json");
    let mut args = vec!["fit", "--histogram", hist, "--mc-runs", "2000000", "--seed", "11", "--output", &out];
    args.extend_from_slice(extra);
    sipm(&args).unwrap();
    serde_json::from_slice(&std::fs::read(Path::new(&out)).unwrap()).unwrap()
}

#[test]
fn sweep_then_fit_recovers_parameters() {
    let dir = TempDir::new().unwrap();
    let hist = path(&dir, "h.csv");
    sipm(&["sweep", "--kind", "histogram", "--source", "thermal:2", "--epsilon-nn", "0.078", "--runs", "200000", "--seed", "21", "--output", &hist]).unwrap();
    let v = fit_json(&dir, &hist, &["--model", "all", "--photon-flux", "2"]);
    let results = v["result"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    let best = &results[0];
    assert_eq!(best["model"], "full_mc");
    let within = |e: &serde_json::Value, truth: f64| {
        let (x, s) = (e["value"].as_f64().unwrap(), e["sigma"].as_f64().unwrap());
        (x - truth).abs() <= 3.0 * s
    };
    assert!(within(&best["mean_n"], 2.0), "{best}");
    assert!(within(&best["epsilon"], 0.078), "{best}");
    assert!(within(&best["eta"], 1.0), "{best}");
    let red = |r: &serde_json::Value| r["chi2"].as_f64().unwrap() / r["dof"].as_f64().unwrap();
    for other in &results[1..] {
        assert!(red(other) >= 2.0 * red(best) || other["model"] == "recursive", "{other}");
    }
}

#[test]
fn overlay_lists_data_and_every_model() {
    let dir = TempDir::new().unwrap();
    let hist = path(&dir, "h.csv");
    let overlay = path(&dir, "ov.csv");
    std::fs::write(&hist, "n,count\n0,500\n1,260\n2,120\n3,70\n4,30\n5,14\n6,6\n").unwrap();
    sipm(&["fit", "--histogram", &hist, "--model", "one-stage", "--overlay", &overlay]).unwrap();
    let text = std::fs::read_to_string(&overlay).unwrap();
    assert!(text.contains("\nn,data,one_stage\n"), "{text}");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 7);
    let data_total: f64 = rows.iter().map(|r| r[1]).sum();
    let model_total: f64 = rows.iter().map(|r| r[2]).sum();
    assert!((data_total - 1.0).abs() < 1e-12);
    assert!(model_total > 0.98 && model_total <= 1.0 + 1e-12, "{model_total}");
    replay_is_identical(&overlay);
}
