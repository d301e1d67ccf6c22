//! Small accumulators for ensemble means.

use libm::sqrt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// A value with a one-sigma uncertainty. For ensemble means the uncertainty
/// is the standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    /// True when `x` lies within `k` sigmas of the value.
    pub fn within(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.sigma
    }
}

/// Exact moments of a non-negative integer observable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntMoments {
    pub count: u64,
    pub sum: u64,
    pub sum_sq: u64,
}

impl IntMoments {
    #[inline]
    pub fn push(&mut self, x: u64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn estimate(&self) -> Estimate {
        if self.count == 0 {
            return Estimate::default();
        }
        let n = self.count as f64;
        let mean = self.sum as f64 / n;
        // Centred sum of squares from exact integers; u128 avoids overflow.
        let centred = (self.sum_sq as u128 * self.count as u128)
            .saturating_sub(self.sum as u128 * self.sum as u128) as f64
            / n;
        standard_error(mean, centred, n)
    }
}

/// Moments of a real observable, accumulated in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FloatMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl FloatMoments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn estimate(&self) -> Estimate {
        if self.count == 0 {
            return Estimate::default();
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let centred = (self.sum_sq - self.sum * mean).max(0.0);
        standard_error(mean, centred, n)
    }
}

fn standard_error(mean: f64, centred_sum_sq: f64, n: f64) -> Estimate {
    if n < 2.0 {
        return Estimate::new(mean, 0.0);
    }
    let variance = centred_sum_sq / (n - 1.0);
    Estimate::new(mean, sqrt(variance / n))
}
