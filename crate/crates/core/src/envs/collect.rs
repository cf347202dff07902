//! Offline dataset collection under a fixed behavior policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bandit::LinearBanditModel;
use crate::engine::{Environment, TabularEnv};
use crate::error::{dim_check, Error, Result};
use crate::mdp::{check_distribution, sample_categorical, Dataset, MarkovPolicy, Step, Trajectory};

/// `n` trajectories of `behavior` in `env`, tagged offline.
pub fn collect_tabular<R: Rng + ?Sized>(env: &TabularEnv, behavior: &MarkovPolicy, n: usize, rng: &mut R) -> Result<Dataset> {
    if behavior.shape() != env.mdp().shape() {
        return Err(Error::Dimension("behavior policy does not match the environment".into()));
    }
    Ok(Dataset::offline((0..n).map(|_| env.sample(behavior, rng)).collect()))
}

/// `n` single-step trajectories with arms drawn from `behavior`, one row of
/// arm probabilities per context.
pub fn collect_bandit<R: Rng + ?Sized>(model: &LinearBanditModel, behavior: &[f64], n: usize, rng: &mut R) -> Result<Dataset> {
    let na = model.num_arms();
    dim_check("behavior probabilities", model.num_contexts() * na, behavior.len())?;
    for (x, row) in behavior.chunks(na).enumerate() {
        check_distribution(&format!("behavior row {x}"), row)?;
    }
    let trajectories = (0..n)
        .map(|_| {
            let x = model.sample_context(rng);
            let a = sample_categorical(&behavior[x * na..(x + 1) * na], rng);
            let r = model.realize_reward(x, a, rng);
            Trajectory::new(vec![Step::new(x, a, r)])
        })
        .collect();
    Ok(Dataset::offline(trajectories))
}

pub fn collect_tabular_seeded(env: &TabularEnv, behavior: &MarkovPolicy, n: usize, seed: u64) -> Result<Dataset> {
    collect_tabular(env, behavior, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn collect_bandit_seeded(model: &LinearBanditModel, behavior: &[f64], n: usize, seed: u64) -> Result<Dataset> {
    collect_bandit(model, behavior, n, &mut ChaCha8Rng::seed_from_u64(seed))
}
