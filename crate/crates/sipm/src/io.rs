//! File formats: histogram input, CSV and JSON artifacts with the producing
//! configuration embedded for replay.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sipm_core::fitting::Histogram;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const GENERATOR: &str = concat!("sipm ", env!("CARGO_PKG_VERSION"));
const CONFIG_PREFIX: &str = "# config: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// A generated file: its role within the command and its exact bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub role: &'static str,
    pub bytes: Vec<u8>,
}

/// Starts a CSV artifact with the comment lines that identify it.
pub fn csv_header(role: &str, config: &RunConfig) -> String {
    let json = serde_json::to_string(config).expect("configs serialise");
    format!("# {GENERATOR} {role}\n{CONFIG_PREFIX}{json}\n")
}

/// Appends one CSV row; fields never contain separators.
pub fn csv_row(out: &mut String, fields: impl IntoIterator<Item = impl std::fmt::Display>) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{f}");
    }
    out.push('\n');
}

#[derive(Serialize, Deserialize)]
struct JsonEnvelope<R> {
    generator: String,
    artifact: String,
    config: RunConfig,
    result: R,
}

pub fn json_artifact<R: Serialize>(role: &'static str, config: &RunConfig, result: &R) -> Artifact {
    let envelope = JsonEnvelope {
        generator: GENERATOR.to_string(),
        artifact: role.to_string(),
        config: config.clone(),
        result,
    };
    let mut bytes = serde_json::to_vec_pretty(&envelope).expect("results serialise");
    bytes.push(b'\n');
    Artifact { role, bytes }
}

/// Role and configuration embedded in a previously written artifact.
pub fn embedded_config(bytes: &[u8], path: &str) -> CliResult<(String, RunConfig)> {
    let text = std::str::from_utf8(bytes).map_err(|_| CliError::parse(path, 1, "file is not UTF-8"))?;
    if text.trim_start().starts_with('{') {
        let env: JsonEnvelope<serde_json::Value> = serde_json::from_str(text)
            .map_err(|e| CliError::parse(path, e.line() as u64, format!("not a sipm JSON record: {e}")))?;
        return Ok((env.artifact, env.config));
    }
    let mut lines = text.lines();
    // "# sipm <version> <role>"; any version is accepted
    let role = lines
        .next()
        .and_then(|l| l.strip_prefix("# sipm "))
        .and_then(|l| l.split_once(' '))
        .map(|(_, role)| role.trim().to_string())
        .ok_or_else(|| CliError::parse(path, 1, "missing '# sipm <version> <artifact>' header"))?;
    let json = lines
        .next()
        .and_then(|l| l.strip_prefix(CONFIG_PREFIX))
        .ok_or_else(|| CliError::parse(path, 2, "missing '# config:' header"))?;
    let config = serde_json::from_str(json).map_err(|e| CliError::parse(path, 2, format!("bad embedded config: {e}")))?;
    Ok((role, config))
}

/// Parses a histogram CSV: header `n,count`, one row per photon number,
/// `#` comments allowed, missing `n` count zero.
pub fn parse_histogram(text: &str, path: &str) -> CliResult<Histogram> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::parse(path, e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    let header_line = headers.position().map_or(1, |p| p.line());
    let names: Vec<&str> = headers.iter().collect();
    if names != ["n", "count"] {
        let line = header_line;
        let message = if names.iter().all(|n| n.is_empty()) {
            "empty file: expected header 'n,count'".to_string()
        } else {
            format!("expected header 'n,count', found '{}'", names.join(","))
        };
        return Err(CliError::parse(path, line, message));
    }
    let mut pairs: Vec<(usize, u64)> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(CliError::parse(path, e.position().map_or(0, |p| p.line()), e.to_string())),
        }
        let line = record.position().map_or(0, |p| p.line());
        let n: usize = record[0]
            .parse()
            .map_err(|_| CliError::parse(path, line, format!("n must be a non-negative integer, got {:?}", &record[0])))?;
        let count: u64 = record[1]
            .parse()
            .map_err(|_| CliError::parse(path, line, format!("count must be a non-negative integer, got {:?}", &record[1])))?;
        if pairs.iter().any(|&(m, _)| m == n) {
            return Err(CliError::parse(path, line, format!("n = {n} appears twice")));
        }
        pairs.push((n, count));
    }
    if pairs.is_empty() {
        return Err(CliError::parse(path, header_line, "no data rows after the header"));
    }
    Ok(Histogram::from_pairs(pairs)?)
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_rows_with_gaps_and_comments() {
        let h = parse_histogram("# lab run 3\nn,count\n0,10\n2, 4\n\n# trailing\n5,1\n", "h.csv").unwrap();
        assert_eq!(h.counts(), &[10, 0, 4, 0, 0, 1]);
    }

    #[test]
    fn header_only_is_a_parse_error() {
        let e = parse_histogram("n,count\n", "h.csv").unwrap_err();
        assert_eq!(e.exit_code(), CliError::PARSE);
        assert!(e.to_string().contains("no data rows"), "{e}");
    }

    #[test]
    fn bad_rows_report_their_line() {
        let e = parse_histogram("n,count\n0,1\n1,x\n", "h.csv").unwrap_err();
        assert_eq!(e.to_string().split(':').nth(1), Some("3"), "{e}");
        let e = parse_histogram("n,count\n0,1\n0,2\n", "h.csv").unwrap_err();
        assert!(e.to_string().starts_with("h.csv:3:"), "{e}");
        let e = parse_histogram("photons,hits\n0,1\n", "h.csv").unwrap_err();
        assert!(e.to_string().starts_with("h.csv:1:"), "{e}");
        let e = parse_histogram("n,count\n0,1,2\n", "h.csv").unwrap_err();
        assert_eq!(e.exit_code(), CliError::PARSE);
        assert_eq!(parse_histogram("", "h.csv").unwrap_err().exit_code(), CliError::PARSE);
    }

    #[test]
    fn all_zero_histogram_is_a_numerical_error() {
        let e = parse_histogram("n,count\n0,0\n1,0\n", "h.csv").unwrap_err();
        assert_eq!(e.exit_code(), CliError::NUMERICAL);
    }
}
