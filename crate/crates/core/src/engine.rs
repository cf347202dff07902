//! The hybrid offline/online loop, generic over an environment and a
//! confidence-based oracle.
//!
//! For episodes `t = 1..=N1` the oracle, fit on the offline data plus the
//! first `t - 1` online trajectories, acts optimistically; the trajectory is
//! appended. At the end a pessimistic policy is extracted from all the data.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{linucb_select, pessimistic_policy_value, ConfidenceSpec, LinearBanditModel, RidgeState};
use crate::error::{dim_check, Error, Result};
use crate::mdp::{
    optimal_policy, sample_trajectory, value_of_policy, Dataset, MarkovPolicy, RewardModel, Shape,
    Step, TabularMdp, Trajectory,
};
use crate::stats::{paired_ratio, Estimate};
use crate::tabular::{plan_actions, uncertainty_of_policy, EstimatedModel, TabularCounts};

/// Ground truth available to the harness but never to the oracle.
pub trait Environment {
    type Policy: Clone + std::fmt::Debug + PartialEq;

    fn optimal_value(&self) -> f64;
    fn policy_value(&self, policy: &Self::Policy) -> Result<f64>;
    fn sample<R: Rng + ?Sized>(&self, policy: &Self::Policy, rng: &mut R) -> Trajectory;
    fn check_trajectory(&self, trajectory: &Trajectory) -> Result<()>;
}

/// A confidence-based estimator: value estimates plus an uncertainty
/// function meant to upper-bound their error.
pub trait Oracle<E: Environment> {
    /// Refits from scratch on `data`.
    fn fit(&mut self, env: &E, data: &Dataset) -> Result<()>;

    /// Absorbs one more trajectory. The resulting state must equal a
    /// from-scratch fit on the extended data. Returns the eluder increment.
    fn update(&mut self, env: &E, trajectory: &Trajectory) -> Result<f64>;

    /// Maximizer of `V_hat + U` and its value.
    fn optimistic(&self, env: &E) -> Result<(E::Policy, f64)>;

    /// Maximizer of `V_hat - U` and its value.
    fn pessimistic(&self, env: &E) -> Result<(E::Policy, f64)>;

    fn value_estimate(&self, env: &E, policy: &E::Policy) -> Result<f64>;

    fn uncertainty(&self, env: &E, policy: &E::Policy) -> Result<f64>;

    /// Upper bound on the summed eluder increments of `n_online` updates.
    fn eluder_bound(&self, n_online: usize) -> f64;
}

// ---------------------------------------------------------------------------
// Tabular instantiation

/// A tabular MDP with a reward-realization model.
#[derive(Clone, Debug)]
pub struct TabularEnv {
    mdp: Arc<TabularMdp>,
    rewards: RewardModel,
    optimal_value: f64,
}

impl TabularEnv {
    pub fn new(mdp: Arc<TabularMdp>, rewards: RewardModel) -> Self {
        let optimal_value = optimal_policy(&mdp).value;
        Self { mdp, rewards, optimal_value }
    }

    pub fn mdp(&self) -> &Arc<TabularMdp> {
        &self.mdp
    }

    pub fn reward_model(&self) -> RewardModel {
        self.rewards
    }
}

impl Environment for TabularEnv {
    type Policy = MarkovPolicy;

    fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    fn policy_value(&self, policy: &MarkovPolicy) -> Result<f64> {
        value_of_policy(&self.mdp, policy)
    }

    fn sample<R: Rng + ?Sized>(&self, policy: &MarkovPolicy, rng: &mut R) -> Trajectory {
        sample_trajectory(&self.mdp, policy, self.rewards, rng)
    }

    fn check_trajectory(&self, trajectory: &Trajectory) -> Result<()> {
        trajectory.validate(self.mdp.shape())
    }
}

/// Count-based optimistic/pessimistic value iteration.
#[derive(Clone, Debug)]
pub struct UcbviOracle {
    model: EstimatedModel,
}

impl UcbviOracle {
    pub fn new(shape: Shape, beta: f64, known_rewards: Option<Arc<[f64]>>) -> Result<Self> {
        Ok(Self { model: EstimatedModel::new(TabularCounts::new(shape), beta, known_rewards)? })
    }

    pub fn model(&self) -> &EstimatedModel {
        &self.model
    }

    fn policy(&self, optimistic: bool) -> Result<(MarkovPolicy, f64)> {
        let (actions, value) = plan_actions(&self.model, optimistic);
        Ok((MarkovPolicy::deterministic(self.model.counts().shape(), &actions)?, value))
    }
}

impl Oracle<TabularEnv> for UcbviOracle {
    fn fit(&mut self, _env: &TabularEnv, data: &Dataset) -> Result<()> {
        let shape = self.model.counts().shape();
        *self.model.counts_mut() = TabularCounts::from_dataset(shape, data)?;
        Ok(())
    }

    fn update(&mut self, _env: &TabularEnv, trajectory: &Trajectory) -> Result<f64> {
        self.model.counts_mut().absorb(trajectory)
    }

    fn optimistic(&self, _env: &TabularEnv) -> Result<(MarkovPolicy, f64)> {
        self.policy(true)
    }

    fn pessimistic(&self, _env: &TabularEnv) -> Result<(MarkovPolicy, f64)> {
        self.policy(false)
    }

    fn value_estimate(&self, _env: &TabularEnv, policy: &MarkovPolicy) -> Result<f64> {
        self.model.value_estimate(policy)
    }

    fn uncertainty(&self, _env: &TabularEnv, policy: &MarkovPolicy) -> Result<f64> {
        uncertainty_of_policy(&self.model, policy)
    }

    fn eluder_bound(&self, n_online: usize) -> f64 {
        let s = self.model.counts().shape();
        s.cells() as f64 * (1.0 + (n_online.max(1) as f64).ln())
    }
}

// ---------------------------------------------------------------------------
// Linear bandit instantiation

/// A bandit episode is a single step; a policy maps each context to an arm.
impl Environment for LinearBanditModel {
    type Policy = Vec<usize>;

    fn optimal_value(&self) -> f64 {
        LinearBanditModel::optimal_value(self)
    }

    fn policy_value(&self, policy: &Vec<usize>) -> Result<f64> {
        self.value_of_arms(policy)
    }

    fn sample<R: Rng + ?Sized>(&self, policy: &Vec<usize>, rng: &mut R) -> Trajectory {
        let x = self.sample_context(rng);
        let a = policy[x];
        let r = self.realize_reward(x, a, rng);
        Trajectory::new(vec![Step::new(x, a, r)])
    }

    fn check_trajectory(&self, trajectory: &Trajectory) -> Result<()> {
        dim_check("bandit trajectory length", 1, trajectory.len())?;
        let step = trajectory.steps[0];
        if step.state as usize >= self.num_contexts() || step.action as usize >= self.num_arms() {
            return Err(Error::Dimension("bandit step outside the model".into()));
        }
        if !step.reward.is_finite() {
            return Err(Error::Range("bandit reward is not finite".into()));
        }
        Ok(())
    }
}

/// Ridge regression with ellipsoidal confidence widths.
#[derive(Clone, Debug)]
pub struct LinUcbOracle {
    state: RidgeState,
    spec: ConfidenceSpec,
}

impl LinUcbOracle {
    pub fn new(dim: usize, lambda: f64, spec: ConfidenceSpec) -> Result<Self> {
        Ok(Self { state: RidgeState::new(dim, lambda)?, spec })
    }

    pub fn state(&self) -> &RidgeState {
        &self.state
    }

    pub fn spec(&self) -> &ConfidenceSpec {
        &self.spec
    }

    fn step_feature<'a>(env: &'a LinearBanditModel, trajectory: &Trajectory) -> Result<(&'a [f64], f64)> {
        env.check_trajectory(trajectory)?;
        let step = trajectory.steps[0];
        Ok((env.feature(step.state as usize, step.action as usize), step.reward))
    }
}

impl Oracle<LinearBanditModel> for LinUcbOracle {
    fn fit(&mut self, env: &LinearBanditModel, data: &Dataset) -> Result<()> {
        let mut state = RidgeState::new(self.state.dim(), self.state.lambda())?;
        let samples = data
            .trajectories()
            .iter()
            .map(|t| Self::step_feature(env, t))
            .collect::<Result<Vec<_>>>()?;
        state.absorb_batch(samples)?;
        self.state = state;
        Ok(())
    }

    fn update(&mut self, env: &LinearBanditModel, trajectory: &Trajectory) -> Result<f64> {
        let (phi, r) = Self::step_feature(env, trajectory)?;
        let increment = self.state.inv_norm_sq(phi).min(1.0);
        self.state.absorb(phi, r)?;
        Ok(increment)
    }

    fn optimistic(&self, env: &LinearBanditModel) -> Result<(Vec<usize>, f64)> {
        let beta = self.state.beta(&self.spec);
        let mut arms = Vec::with_capacity(env.num_contexts());
        let mut value = 0.0;
        for x in 0..env.num_contexts() {
            let a = linucb_select(&self.state, env.context_features(x), &self.spec)?;
            let phi = env.feature(x, a);
            value += env.context_dist()[x] * (self.state.predict(phi) + beta * self.state.inv_norm_sq(phi).sqrt());
            arms.push(a);
        }
        Ok((arms, value))
    }

    fn pessimistic(&self, env: &LinearBanditModel) -> Result<(Vec<usize>, f64)> {
        pessimistic_policy_value(&self.state, env, &self.spec)
    }

    fn value_estimate(&self, env: &LinearBanditModel, policy: &Vec<usize>) -> Result<f64> {
        dim_check("arm map", env.num_contexts(), policy.len())?;
        Ok(policy
            .iter()
            .enumerate()
            .map(|(x, &a)| env.context_dist()[x] * self.state.predict(env.feature(x, a)))
            .sum())
    }

    fn uncertainty(&self, env: &LinearBanditModel, policy: &Vec<usize>) -> Result<f64> {
        dim_check("arm map", env.num_contexts(), policy.len())?;
        let beta = self.state.beta(&self.spec);
        Ok(policy
            .iter()
            .enumerate()
            .map(|(x, &a)| env.context_dist()[x] * beta * self.state.inv_norm_sq(env.feature(x, a)).sqrt())
            .sum())
    }

    fn eluder_bound(&self, n_online: usize) -> f64 {
        let d = self.state.dim() as f64;
        let lambda = self.state.lambda();
        2.0 * d * (1.0 + n_online as f64 / (lambda * d)).ln()
    }
}

// ---------------------------------------------------------------------------
// The loop

/// Which outputs a run produces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Final pessimistic policy only.
    Gap,
    /// Online regret only.
    Regret,
    #[default]
    Both,
}

impl RunMode {
    pub fn wants_gap(self) -> bool {
        matches!(self, RunMode::Gap | RunMode::Both)
    }
}

/// How the oracle state is refreshed after each online episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refit {
    #[default]
    Incremental,
    /// Full refit on the accumulated dataset every episode.
    FromScratch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridRunConfig {
    pub n_online: usize,
    #[serde(default)]
    pub mode: RunMode,
    pub delta: f64,
    pub seed: u64,
    #[serde(default)]
    pub refit: Refit,
}

impl HybridRunConfig {
    pub fn new(n_online: usize, seed: u64) -> Self {
        Self { n_online, mode: RunMode::Both, delta: 0.05, seed, refit: Refit::Incremental }
    }

    fn validate(&self) -> Result<()> {
        if self.n_online == 0 {
            return Err(Error::Config("n_online must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

/// Run-level checks and bookkeeping. Wall time is excluded from equality.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_offline: usize,
    pub n_online: usize,
    pub eluder_sum: f64,
    pub eluder_bound: f64,
    /// Uncertainty of the final policy under the final fit.
    pub final_uncertainty: Option<f64>,
    /// `|V_hat - V|` of the final policy.
    pub final_estimation_error: Option<f64>,
    pub wall_time_secs: f64,
}

impl PartialEq for Diagnostics {
    fn eq(&self, other: &Self) -> bool {
        self.n_offline == other.n_offline
            && self.n_online == other.n_online
            && self.eluder_sum.to_bits() == other.eluder_sum.to_bits()
            && self.eluder_bound.to_bits() == other.eluder_bound.to_bits()
            && self.final_uncertainty.map(f64::to_bits) == other.final_uncertainty.map(f64::to_bits)
            && self.final_estimation_error.map(f64::to_bits) == other.final_estimation_error.map(f64::to_bits)
    }
}

impl Diagnostics {
    pub fn eluder_ok(&self) -> bool {
        self.eluder_sum <= self.eluder_bound + 1e-9
    }

    /// Whether the uncertainty covered the estimation error; `None` without a
    /// final policy.
    pub fn covered(&self) -> Option<bool> {
        Some(self.final_estimation_error? <= self.final_uncertainty?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult<P> {
    /// Sub-optimality of the optimistic policy executed in each episode.
    pub per_episode_gap: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    /// Running sum of the eluder increments.
    pub cumulative_eluder: Vec<f64>,
    pub final_policy: Option<P>,
    pub final_gap: Option<f64>,
    pub final_lcb: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl<P> RunResult<P> {
    pub fn total_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// Runs the hybrid loop from `offline` data. The oracle is refit on
/// `offline` first, so its prior state is irrelevant.
pub fn run_hybrid<E, O>(env: &E, oracle: &mut O, offline: &Dataset, config: &HybridRunConfig) -> Result<RunResult<E::Policy>>
where
    E: Environment,
    O: Oracle<E>,
{
    config.validate()?;
    if offline.n_online() > 0 {
        return Err(Error::Dataset("offline dataset contains online trajectories".into()));
    }
    for traj in offline.trajectories() {
        env.check_trajectory(traj)?;
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v_star = env.optimal_value();

    let mut data = offline.clone();
    oracle.fit(env, &data)?;
    let mut per_episode_gap = Vec::with_capacity(config.n_online);
    let mut cumulative_regret = Vec::with_capacity(config.n_online);
    let mut cumulative_eluder = Vec::with_capacity(config.n_online);
    let mut regret = 0.0;
    let mut eluder_sum = 0.0;
    for t in 1..=config.n_online {
        let (policy, _) = oracle.optimistic(env)?;
        let gap = (v_star - env.policy_value(&policy)?).max(0.0);
        regret += gap;
        per_episode_gap.push(gap);
        cumulative_regret.push(regret);

        let traj = env.sample(&policy, &mut rng);
        eluder_sum += oracle.update(env, &traj)?;
        cumulative_eluder.push(eluder_sum);
        data.push_online(t, traj)?;
        if config.refit == Refit::FromScratch {
            oracle.fit(env, &data)?;
        }
    }

    let mut result = RunResult {
        per_episode_gap,
        cumulative_regret,
        cumulative_eluder,
        final_policy: None,
        final_gap: None,
        final_lcb: None,
        diagnostics: Diagnostics {
            n_offline: offline.len(),
            n_online: config.n_online,
            eluder_sum,
            eluder_bound: oracle.eluder_bound(config.n_online),
            final_uncertainty: None,
            final_estimation_error: None,
            wall_time_secs: 0.0,
        },
    };
    if config.mode.wants_gap() {
        let (policy, lcb) = oracle.pessimistic(env)?;
        let value = env.policy_value(&policy)?;
        let estimate = oracle.value_estimate(env, &policy)?;
        result.final_gap = Some((v_star - value).max(0.0));
        result.final_lcb = Some(lcb);
        result.diagnostics.final_uncertainty = Some(oracle.uncertainty(env, &policy)?);
        result.diagnostics.final_estimation_error = Some((estimate - value).abs());
        result.final_policy = Some(policy);
    }
    result.diagnostics.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(result)
}

/// [`run_hybrid`] without offline data.
pub fn run_pure_online_baseline<E, O>(env: &E, oracle: &mut O, config: &HybridRunConfig) -> Result<RunResult<E::Policy>>
where
    E: Environment,
    O: Oracle<E>,
{
    run_hybrid(env, oracle, &Dataset::new(), config)
}

/// Paired ratios hybrid / baseline across trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub regret_ratio: Estimate,
    pub final_gap_ratio: Option<Estimate>,
    pub trials: usize,
}

/// Ratio of mean cumulative regret at `N1` (and of mean final gap) between
/// paired hybrid and baseline trials.
pub fn speedup_report<P>(hybrid: &[RunResult<P>], baseline: &[RunResult<P>]) -> Result<SpeedupReport> {
    if hybrid.is_empty() || hybrid.len() != baseline.len() {
        return Err(Error::Config(format!(
            "speedup needs matched trials, got {} and {}",
            hybrid.len(),
            baseline.len()
        )));
    }
    for (h, b) in hybrid.iter().zip(baseline) {
        if h.diagnostics.n_online != b.diagnostics.n_online {
            return Err(Error::Config("runs differ in n_online".into()));
        }
    }
    let regrets = |runs: &[RunResult<P>]| runs.iter().map(|r| r.total_regret()).collect::<Vec<_>>();
    let gaps = |runs: &[RunResult<P>]| runs.iter().map(|r| r.final_gap).collect::<Option<Vec<_>>>();
    let final_gap_ratio = match (gaps(hybrid), gaps(baseline)) {
        (Some(a), Some(b)) => Some(paired_ratio(&a, &b)),
        _ => None,
    };
    Ok(SpeedupReport {
        regret_ratio: paired_ratio(&regrets(hybrid), &regrets(baseline)),
        final_gap_ratio,
        trials: hybrid.len(),
    })
}
