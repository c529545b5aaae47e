//! Gaussian kernel density estimation over referent colors.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AgreementError;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// `0.9 · min(σ, IQR / 1.34) · n^(-1/5)`
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianKde {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl GaussianKde {
    pub fn new(samples: Vec<f64>, rule: Bandwidth) -> Result<Self, AgreementError> {
        if samples.is_empty() {
            return Err(AgreementError::Empty);
        }
        let bandwidth = match rule {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Silverman => silverman(&samples),
        };
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(AgreementError::DegenerateBandwidth);
        }
        Ok(GaussianKde { samples, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * math::sqrt(2.0 * math::PI));
        self.samples
            .iter()
            .map(|s| {
                let u = (x - s) / h;
                math::exp(-0.5 * u * u)
            })
            .sum::<f64>()
            * norm
    }

    /// Support covering all samples plus `pad` bandwidths on each side.
    pub fn extended_support(&self, pad: f64) -> (f64, f64) {
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - pad * self.bandwidth, hi + pad * self.bandwidth)
    }

    /// Trapezoid-rule integral of the density over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, steps: usize) -> f64 {
        trapezoid(|x| self.density(x), lo, hi, steps)
    }

    /// `points` evenly spaced samples `x_i = lo + i (hi − lo) / points`.
    pub fn curve(&self, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
        (0..points)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / points as f64;
                (x, self.density(x))
            })
            .collect()
    }
}

/// `∫ min(f, g)` over `[lo, hi]`; zero for disjoint densities, one for identical ones.
pub fn overlap(a: &GaussianKde, b: &GaussianKde, lo: f64, hi: f64, steps: usize) -> f64 {
    trapezoid(|x| a.density(x).min(b.density(x)), lo, hi, steps)
}

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let steps = steps.max(1);
    let dx = (hi - lo) / steps as f64;
    let mut acc = 0.5 * (f(lo) + f(hi));
    for i in 1..steps {
        acc += f(lo + dx * i as f64);
    }
    acc * dx
}

fn silverman(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let sd = math::sqrt(var);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * math::powf(n, -0.2)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
