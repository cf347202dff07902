//! Random linear bandits with sphere features and random tabular MDPs with
//! simplex-uniform transition rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bandit::{LinearBanditModel, NoiseModel};
use crate::error::{Error, Result};
use crate::mdp::{RewardModel, Shape, TabularMdp, TransitionRow};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBanditSpec {
    pub num_contexts: usize,
    pub num_arms: usize,
    pub dim: usize,
    /// Rewards are `phi . e_1 + U[-w, w]`.
    pub noise_half_width: f64,
}

impl Default for SyntheticBanditSpec {
    fn default() -> Self {
        Self { num_contexts: 20, num_arms: 100, dim: 10, noise_half_width: 1.0 }
    }
}

/// Uniform draw from the unit sphere in `R^d`.
pub fn sphere_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// A bandit whose `(context, arm)` features are fixed sphere draws, with
/// `theta* = e_1` and uniform contexts.
pub fn generate_synthetic_bandit(spec: &SyntheticBanditSpec, seed: u64) -> Result<LinearBanditModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = spec.num_contexts * spec.num_arms;
    let mut features = Vec::with_capacity(pairs * spec.dim);
    for _ in 0..pairs {
        features.extend(sphere_point(spec.dim, &mut rng));
    }
    let mut theta = vec![0.0; spec.dim];
    if let Some(first) = theta.first_mut() {
        *first = 1.0;
    }
    let context_dist = vec![1.0 / spec.num_contexts.max(1) as f64; spec.num_contexts];
    LinearBanditModel::new(
        spec.dim,
        spec.num_contexts,
        spec.num_arms,
        features,
        theta,
        context_dist,
        NoiseModel::Uniform { half_width: spec.noise_half_width },
    )
}

/// Fresh arm features every episode: each item is `num_arms` sphere points
/// concatenated.
#[derive(Clone, Debug)]
pub struct FeatureStream {
    dim: usize,
    num_arms: usize,
    rng: ChaCha8Rng,
}

impl FeatureStream {
    pub fn new(spec: &SyntheticBanditSpec, seed: u64) -> Self {
        Self { dim: spec.dim, num_arms: spec.num_arms, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Iterator for FeatureStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim * self.num_arms);
        for _ in 0..self.num_arms {
            out.extend(sphere_point(self.dim, &mut self.rng));
        }
        Some(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticMdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Whether the oracle is handed the true mean rewards.
    pub known_rewards: bool,
    pub reward_model: RewardModel,
}

impl Default for SyntheticMdpSpec {
    fn default() -> Self {
        Self { num_states: 5, num_actions: 10, horizon: 3, known_rewards: true, reward_model: RewardModel::Bernoulli }
    }
}

impl SyntheticMdpSpec {
    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.num_states, self.num_actions, self.horizon)
    }
}

/// Uniform draw from the probability simplex (normalized exponentials).
pub fn simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Non-stationary MDP with simplex-uniform rows, `U[0, 1]` mean rewards and a
/// uniform initial distribution.
pub fn generate_synthetic_mdp(spec: &SyntheticMdpSpec, seed: u64) -> Result<TabularMdp> {
    let shape = spec.shape()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = shape.num_states;
    let mut rows = Vec::with_capacity(shape.cells());
    for _ in 0..shape.cells() {
        rows.push(TransitionRow::Sparse(simplex_point(nx, &mut rng).into_iter().enumerate().collect()));
    }
    let rewards = (0..shape.cells()).map(|_| rng.random::<f64>()).collect();
    TabularMdp::from_rows(shape, false, rows, rewards, vec![1.0 / nx as f64; nx])
        .map_err(|e| Error::Numerical(format!("generated MDP failed validation: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandit_construction() {
        let model = generate_synthetic_bandit(&SyntheticBanditSpec::default(), 1).unwrap();
        for x in 0..20 {
            for a in 0..100 {
                let phi = model.feature(x, a);
                let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-9);
                assert_eq!(model.mean_reward(x, a), phi[0]);
            }
        }
        assert_eq!(model, generate_synthetic_bandit(&SyntheticBanditSpec::default(), 1).unwrap());
    }

    #[test]
    fn feature_stream_is_deterministic() {
        let spec = SyntheticBanditSpec::default();
        let a: Vec<_> = FeatureStream::new(&spec, 4).take(3).collect();
        let b: Vec<_> = FeatureStream::new(&spec, 4).take(3).collect();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 1000);
    }

    #[test]
    fn expected_best_arm_reward() {
        let spec = SyntheticBanditSpec::default();
        let n = 10_000;
        let mean: f64 = FeatureStream::new(&spec, 9)
            .take(n)
            .map(|f| f.chunks(10).map(|phi| phi[0]).fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / n as f64;
        assert!((0.5..=1.0).contains(&mean), "{mean}");
    }

    #[test]
    fn mdp_rows_and_seeds() {
        let spec = SyntheticMdpSpec::default();
        let a = generate_synthetic_mdp(&spec, 1).unwrap();
        let b = generate_synthetic_mdp(&spec, 2).unwrap();
        assert_ne!(a, b);
        for h in 0..3 {
            for x in 0..5 {
                for u in 0..10 {
                    let s: f64 = (0..5).map(|y| a.transition_prob(h, x, u, y)).sum();
                    assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn transition_entries_have_dirichlet_mean() {
        let spec = SyntheticMdpSpec { num_states: 4, num_actions: 1, horizon: 1, ..Default::default() };
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|s| generate_synthetic_mdp(&spec, s).unwrap().transition_prob(0, 2, 0, 1)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.25).abs() <= 3.0 * (var / n as f64).sqrt());
    }
}
