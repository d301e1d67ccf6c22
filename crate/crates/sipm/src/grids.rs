//! Parsers for list and range arguments.

use std::str::FromStr;

use sipm_core::fitting::ParamRange;
use sipm_core::sources::{FixedSource, Source, ThermalSource};

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("not a number: {s:?}"))
}

/// Rounds away binary noise from `a + i * step`, e.g. 0.07000000000000001.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// `a:b` (unit steps), `a:b:step`, or a comma-separated list.
pub fn usize_grid(s: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let out: Vec<usize> = match parts.as_slice() {
        [list] => list.split(',').map(parse_num).collect::<Result<_, _>>()?,
        [a, b] => (parse_num(a)?..=parse_num(b)?).collect(),
        [a, b, step] => {
            let step: usize = parse_num(step)?;
            if step == 0 {
                return Err("step must be positive".into());
            }
            (parse_num(a)?..=parse_num(b)?).step_by(step).collect()
        }
        _ => return Err(format!("expected a:b, a:b:step or a list, got {s:?}")),
    };
    if out.is_empty() {
        return Err(format!("{s:?} describes an empty grid"));
    }
    Ok(out)
}

pub fn u64_grid(s: &str) -> Result<Vec<u64>, String> {
    Ok(usize_grid(s)?.into_iter().map(|n| n as u64).collect())
}

/// `a:b:step` or a comma-separated list.
pub fn f64_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let out: Vec<f64> = match parts.as_slice() {
        [list] => list.split(',').map(parse_num).collect::<Result<_, _>>()?,
        [a, b, step] => {
            let (a, b, step): (f64, f64, f64) = (parse_num(a)?, parse_num(b)?, parse_num(step)?);
            if !(step > 0.0) || b < a {
                return Err(format!("{s:?} needs a positive step and a <= b"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| tidy(a + i as f64 * step)).collect()
        }
        _ => return Err(format!("expected a:b:step or a list, got {s:?}")),
    };
    if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
        return Err(format!("{s:?} is not a valid grid"));
    }
    Ok(out)
}

/// `lo:hi:points`.
pub fn param_range(s: &str) -> Result<ParamRange, String> {
    match s.split(':').collect::<Vec<_>>().as_slice() {
        [lo, hi, points] => Ok(ParamRange::new(parse_num(lo)?, parse_num(hi)?, parse_num(points)?)),
        _ => Err(format!("expected lo:hi:points, got {s:?}")),
    }
}

/// `thermal:MEAN` or `fixed:N`.
pub fn source(s: &str) -> Result<Source, String> {
    match s.split_once(':') {
        Some(("thermal", mean)) => ThermalSource::new(parse_num(mean)?)
            .map(Source::from)
            .map_err(|e| e.to_string()),
        Some(("fixed", n)) => Ok(FixedSource { n: parse_num(n)? }.into()),
        _ => Err(format!("expected thermal:MEAN or fixed:N, got {s:?}")),
    }
}

/// `row,col`.
pub fn cell(s: &str) -> Result<(usize, usize), String> {
    match s.split_once(',') {
        Some((r, c)) => Ok((parse_num(r)?, parse_num(c)?)),
        None => Err(format!("expected row,col, got {s:?}")),
    }
}
