//! Trial-level summary statistics.

use serde::{Deserialize, Serialize};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.96;

/// Mean with standard error and a 95% normal interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl Estimate {
    /// Summary of `values`; the standard error uses the unbiased variance and
    /// is 0 for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self::from_mean_se(mean, se, n)
    }

    pub fn from_mean_se(mean: f64, se: f64, n: usize) -> Self {
        Self { mean, se, ci_low: mean - Z95 * se, ci_high: mean + Z95 * se, n }
    }

    /// True when the two intervals are disjoint.
    pub fn separated_from(&self, other: &Estimate) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

/// Ratio of means of paired samples with a delta-method 95% interval.
pub fn paired_ratio(numerator: &[f64], denominator: &[f64]) -> Estimate {
    let n = numerator.len().min(denominator.len());
    let (a, b) = (&numerator[..n], &denominator[..n]);
    let ea = Estimate::of(a);
    let eb = Estimate::of(b);
    if eb.mean == 0.0 {
        let ratio = if ea.mean == 0.0 { 1.0 } else { f64::INFINITY };
        return Estimate::from_mean_se(ratio, 0.0, n);
    }
    if a == b {
        return Estimate::from_mean_se(1.0, 0.0, n);
    }
    let ratio = ea.mean / eb.mean;
    if n < 2 {
        return Estimate::from_mean_se(ratio, 0.0, n);
    }
    let cov = a.iter().zip(b).map(|(x, y)| (x - ea.mean) * (y - eb.mean)).sum::<f64>() / (n - 1) as f64;
    let var_a = ea.se * ea.se;
    let var_b = eb.se * eb.se;
    let cov_mean = cov / n as f64;
    let rel = var_a / (ea.mean * ea.mean).max(f64::MIN_POSITIVE) + var_b / (eb.mean * eb.mean)
        - 2.0 * cov_mean / (ea.mean * eb.mean);
    let se = if ea.mean == 0.0 {
        (var_a).sqrt() / eb.mean.abs()
    } else {
        ratio.abs() * rel.max(0.0).sqrt()
    };
    Estimate::from_mean_se(ratio, se, n)
}
