//! Photon-number distributions of the light hitting the detector.

use alloc::vec::Vec;

use libm::{exp, floor, log, log1p};
use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RunRng;

/// A photon-number distribution that can be evaluated and sampled.
pub trait PhotonSource {
    fn pmf(&self, n: u64) -> f64;

    fn sample(&self, rng: &mut RunRng) -> u64;

    fn mean(&self) -> f64;

    /// Largest photon number worth tabulating.
    fn cutoff(&self) -> u64;

    /// `pmf(0..=cutoff)`.
    fn pmf_table(&self) -> Vec<f64> {
        (0..=self.cutoff()).map(|n| self.pmf(n)).collect()
    }
}

/// Single-mode thermal (Bose-Einstein) light with mean photon number `mean_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ThermalSource {
    mean_n: f64,
}

impl ThermalSource {
    pub fn new(mean_n: f64) -> Result<Self> {
        if !(mean_n.is_finite() && mean_n >= 0.0) {
            return Err(Error::InvalidMean(mean_n));
        }
        Ok(Self { mean_n })
    }

    /// ln of the ratio p(n+1)/p(n).
    pub fn log_ratio(&self) -> f64 {
        log(self.mean_n) - log1p(self.mean_n)
    }
}

impl PhotonSource for ThermalSource {
    fn pmf(&self, n: u64) -> f64 {
        // mean_n was validated on construction
        log_thermal_pmf(n, self.mean_n).map_or(0.0, exp)
    }

    fn sample(&self, rng: &mut RunRng) -> u64 {
        if self.mean_n == 0.0 {
            return 0;
        }
        // inverse CDF of the geometric law P(N >= n) = q^n
        let u = 1.0 - rng.random::<f64>();
        let n = floor(log(u) / self.log_ratio());
        if n >= u64::MAX as f64 {
            u64::MAX
        } else {
            n as u64
        }
    }

    fn mean(&self) -> f64 {
        self.mean_n
    }

    /// 10x the mean, at least 50.
    fn cutoff(&self) -> u64 {
        let c = libm::ceil(10.0 * self.mean_n);
        if c > 50.0 {
            c as u64
        } else {
            50
        }
    }
}

/// Deterministic photon number per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FixedSource {
    pub n: u64,
}

impl PhotonSource for FixedSource {
    fn pmf(&self, n: u64) -> f64 {
        if n == self.n {
            1.0
        } else {
            0.0
        }
    }

    fn sample(&self, _rng: &mut RunRng) -> u64 {
        self.n
    }

    fn mean(&self) -> f64 {
        self.n as f64
    }

    fn cutoff(&self) -> u64 {
        self.n
    }
}

/// The built-in sources behind one type, for configs and files.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Source {
    Thermal(ThermalSource),
    Fixed(FixedSource),
}

impl PhotonSource for Source {
    fn pmf(&self, n: u64) -> f64 {
        match self {
            Source::Thermal(s) => s.pmf(n),
            Source::Fixed(s) => s.pmf(n),
        }
    }

    fn sample(&self, rng: &mut RunRng) -> u64 {
        match self {
            Source::Thermal(s) => s.sample(rng),
            Source::Fixed(s) => s.sample(rng),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Source::Thermal(s) => s.mean(),
            Source::Fixed(s) => s.mean(),
        }
    }

    fn cutoff(&self) -> u64 {
        match self {
            Source::Thermal(s) => s.cutoff(),
            Source::Fixed(s) => s.cutoff(),
        }
    }
}

impl From<ThermalSource> for Source {
    fn from(s: ThermalSource) -> Self {
        Source::Thermal(s)
    }
}

impl From<FixedSource> for Source {
    fn from(s: FixedSource) -> Self {
        Source::Fixed(s)
    }
}

/// ln p(n) for thermal light; `None` where p(n) = 0.
fn log_thermal_pmf(n: u64, mean_n: f64) -> Option<f64> {
    if mean_n == 0.0 {
        return (n == 0).then_some(0.0);
    }
    Some(-log1p(mean_n) + n as f64 * (log(mean_n) - log1p(mean_n)))
}

/// p(n) = (1/(1+m)) (m/(1+m))^n, evaluated in log space.
pub fn thermal_pmf(n: u64, mean_n: f64) -> Result<f64> {
    if !(mean_n.is_finite() && mean_n >= 0.0) {
        return Err(Error::InvalidMean(mean_n));
    }
    Ok(log_thermal_pmf(n, mean_n).map_or(0.0, exp))
}

pub fn sample_photon_number(source: &impl PhotonSource, rng: &mut RunRng) -> u64 {
    source.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn vacuum() {
        assert_eq!(thermal_pmf(0, 0.0).unwrap(), 1.0);
        assert_eq!(thermal_pmf(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_mean_halves_each_step() {
        for k in 0..30u64 {
            let expect = 0.5f64.powi(k as i32 + 1);
            assert!((thermal_pmf(k, 1.0).unwrap() - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn normalised() {
        let s: f64 = (0..=200).map(|n| thermal_pmf(n, 5.0).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_mean_rejected() {
        assert!(thermal_pmf(0, -0.5).is_err());
        assert!(ThermalSource::new(f64::INFINITY).is_err());
    }

    #[test]
    fn semilog_slope_is_constant() {
        let s = ThermalSource::new(2.7).unwrap();
        let slope = s.log_ratio();
        for n in 0..100 {
            let d = log(s.pmf(n + 1)) - log(s.pmf(n));
            assert!((d - slope).abs() < 1e-9);
        }
    }

    #[test]
    fn trivial_samplers() {
        let mut rng = RngSeed::new(1, 1).rng();
        let fixed = FixedSource { n: 7 };
        let dark = ThermalSource::new(0.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_photon_number(&fixed, &mut rng), 7);
            assert_eq!(sample_photon_number(&dark, &mut rng), 0);
        }
    }

    #[test]
    fn cutoff_defaults() {
        assert_eq!(ThermalSource::new(2.0).unwrap().cutoff(), 50);
        assert_eq!(ThermalSource::new(12.3).unwrap().cutoff(), 123);
    }
}
