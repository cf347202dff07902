//! Two-arm linear bandit used for lower-bound experiments: arm 0 has a
//! truncated-normal feature, arm 1 the zero feature.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bandit::{LinearBanditModel, NoiseModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardInstanceSpec {
    /// `||theta*||`, at most `1/sqrt(2)`.
    pub radius: f64,
    /// Size of the finite context pool drawn at generation time.
    pub num_contexts: usize,
}

impl Default for HardInstanceSpec {
    fn default() -> Self {
        Self { radius: FRAC_1_SQRT_2, num_contexts: 1000 }
    }
}

/// Standard 2-d normal conditioned on the unit disk, by rejection.
pub fn truncated_normal_2d<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        if x * x + y * y <= 1.0 {
            return [x, y];
        }
    }
}

/// Exact `E ||z||^2` for the disk-truncated standard normal:
/// `(2 - 3 e^{-1/2}) / (1 - e^{-1/2})`.
pub fn truncated_normal_2d_second_moment() -> f64 {
    let e = (-0.5f64).exp();
    (2.0 - 3.0 * e) / (1.0 - e)
}

pub fn generate_hard_instance(spec: &HardInstanceSpec, seed: u64) -> Result<LinearBanditModel> {
    if !(spec.radius > 0.0 && spec.radius <= FRAC_1_SQRT_2 + 1e-12) {
        return Err(Error::Range(format!("radius {} outside (0, 1/sqrt(2)]", spec.radius)));
    }
    if spec.num_contexts == 0 {
        return Err(Error::Config("hard instance needs at least one context".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = rng.random_range(0.0..TAU);
    let theta = vec![spec.radius * gamma.cos(), spec.radius * gamma.sin()];
    let mut features = Vec::with_capacity(spec.num_contexts * 4);
    for _ in 0..spec.num_contexts {
        features.extend(truncated_normal_2d(&mut rng));
        features.extend([0.0, 0.0]);
    }
    let context_dist = vec![1.0 / spec.num_contexts as f64; spec.num_contexts];
    LinearBanditModel::new(2, spec.num_contexts, 2, features, theta, context_dist, NoiseModel::Gaussian { std: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction() {
        let spec = HardInstanceSpec { radius: 0.5, num_contexts: 50 };
        let m = generate_hard_instance(&spec, 3).unwrap();
        let t = m.theta_star();
        assert!(((t[0] * t[0] + t[1] * t[1]).sqrt() - 0.5).abs() < 1e-12);
        for x in 0..50 {
            assert_eq!(m.mean_reward(x, 1), 0.0);
        }
        assert!(generate_hard_instance(&HardInstanceSpec { radius: 0.8, num_contexts: 5 }, 1).is_err());
    }

    #[test]
    fn second_moment_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let [x, y] = truncated_normal_2d(&mut rng);
                x * x + y * y
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let exact = truncated_normal_2d_second_moment();
        assert!((mean - exact).abs() <= 4.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
        assert!((exact - 0.4585).abs() < 1e-3);
    }
}
