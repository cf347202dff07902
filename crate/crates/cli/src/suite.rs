//! Runs every (experiment, trial) pair of a configuration.

use std::sync::Arc;

use hybrid_rl::bandit::{concentrability_linear, ConfidenceSpec, LinearBanditModel, RidgeState};
use hybrid_rl::engine::{run_hybrid, HybridRunConfig, LinUcbOracle, RunResult, TabularEnv, UcbviOracle};
use hybrid_rl::envs::boltzmann::{boltzmann_arms, boltzmann_policy};
use hybrid_rl::envs::collect::{collect_bandit, collect_tabular};
use hybrid_rl::envs::hard::generate_hard_instance;
use hybrid_rl::envs::mountain_car::{build_mountain_car, collect_pools, CollectorOutput};
use hybrid_rl::envs::movielens::movielens_ingest;
use hybrid_rl::envs::synthetic::{generate_synthetic_bandit, generate_synthetic_mdp};
use hybrid_rl::mdp::{concentrability_tabular, optimal_policy, Dataset, MarkovPolicy, RewardModel, TabularMdp};
use hybrid_rl::tabular::{TabularBonus, TabularCounts};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cache::{hash_json, EnvCache};
use crate::config::{BehaviorConfig, EnvironmentConfig, ExperimentConfig};
use crate::CliError;

/// Id of the run without offline data.
pub const BASELINE_ID: &str = "online";

/// A materialized environment shared by all trials.
#[derive(Clone, Debug)]
pub enum BuiltEnv {
    Bandit(Arc<LinearBanditModel>),
    Tabular {
        env: TabularEnv,
        q_star: Arc<[f64]>,
        optimal: Arc<MarkovPolicy>,
    },
    MountainCar {
        env: TabularEnv,
        pools: Arc<CollectorOutput>,
    },
}

impl BuiltEnv {
    pub fn tabular_env(&self) -> Option<&TabularEnv> {
        match self {
            BuiltEnv::Bandit(_) => None,
            BuiltEnv::Tabular { env, .. } | BuiltEnv::MountainCar { env, .. } => Some(env),
        }
    }
}

fn tabular(mdp: TabularMdp, rewards: RewardModel) -> BuiltEnv {
    let solution = optimal_policy(&mdp);
    BuiltEnv::Tabular {
        env: TabularEnv::new(Arc::new(mdp), rewards),
        q_star: solution.q_values.into(),
        optimal: Arc::new(solution.policy),
    }
}

pub fn build_environment(config: &EnvironmentConfig, cache: &EnvCache) -> Result<BuiltEnv, CliError> {
    let key = (config.kind(), config);
    Ok(match config {
        EnvironmentConfig::SyntheticBandit { seed, spec } => {
            let model = cache.get_or_build("env", &key, || generate_synthetic_bandit(spec, *seed))?;
            BuiltEnv::Bandit(Arc::new(model))
        }
        EnvironmentConfig::HardInstance { seed, spec } => {
            let model = cache.get_or_build("env", &key, || generate_hard_instance(spec, *seed))?;
            BuiltEnv::Bandit(Arc::new(model))
        }
        EnvironmentConfig::Movielens { seed, path, spec } => {
            let bytes = std::fs::read(path).map_err(|e| CliError::Io { path: path.clone(), error: e })?;
            let key = ("movielens", hash_json(&bytes), spec, seed);
            let model = cache.get_or_build("env", &key, || movielens_ingest(path, spec, *seed).map(|b| b.model))?;
            BuiltEnv::Bandit(Arc::new(model))
        }
        EnvironmentConfig::SyntheticMdp { seed, spec } => {
            let mdp = cache.get_or_build("env", &key, || generate_synthetic_mdp(spec, *seed))?;
            tabular(mdp, spec.reward_model)
        }
        EnvironmentConfig::MountainCar { seed, spec, collector } => {
            let mdp = cache.get_or_build("env", &("mountain_car", spec), || build_mountain_car(spec))?;
            let pools = collect_pools(spec, &mdp, collector, *seed)?;
            BuiltEnv::MountainCar { env: TabularEnv::new(Arc::new(mdp), RewardModel::Mean), pools: Arc::new(pools) }
        }
    })
}

/// One arm of a suite: a behavior at one offline size, or the baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub id: String,
    pub behavior: Option<BehaviorConfig>,
    pub n_offline: usize,
}

pub fn experiment_id(label: &str, n_offline: usize) -> String {
    format!("{label}/n0={n_offline}")
}

/// Behaviors in config order, each across the offline grid, then the baseline.
pub fn plan_experiments(config: &ExperimentConfig) -> Vec<ExperimentPlan> {
    let mut plans = Vec::new();
    for b in &config.behaviors {
        for &n in &config.n_offline {
            plans.push(ExperimentPlan { id: experiment_id(&b.label, n), behavior: Some(b.clone()), n_offline: n });
        }
    }
    if config.include_baseline {
        plans.push(ExperimentPlan { id: BASELINE_ID.into(), behavior: None, n_offline: 0 });
    }
    plans
}

/// Behavior materialized against an environment.
#[derive(Clone, Debug)]
enum Behavior {
    None,
    Arms(Arc<Vec<f64>>),
    Policy(Arc<MarkovPolicy>),
    Mix(f64),
}

fn materialize(env: &BuiltEnv, behavior: Option<&BehaviorConfig>) -> Result<Behavior, CliError> {
    let Some(b) = behavior else {
        return Ok(Behavior::None);
    };
    Ok(match env {
        BuiltEnv::Bandit(model) => Behavior::Arms(Arc::new(boltzmann_arms(model, b.k.expect("validated").0)?)),
        BuiltEnv::Tabular { env, q_star, .. } => {
            Behavior::Policy(Arc::new(boltzmann_policy(env.mdp().shape(), q_star, b.k.expect("validated").0)?))
        }
        BuiltEnv::MountainCar { .. } => Behavior::Mix(b.alpha.expect("validated")),
    })
}

/// What one trial leaves behind.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub per_episode_gap: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    pub cumulative_eluder: Vec<f64>,
    pub final_gap: Option<f64>,
    pub final_lcb: Option<f64>,
    /// Proxy `C(pi* | rho)` of the trial's offline data.
    pub concentrability: Option<f64>,
    /// Occupancy-ratio bound, tabular only.
    pub ratio_bound: Option<f64>,
    pub eluder_sum: f64,
    pub eluder_bound: f64,
    pub covered: Option<bool>,
    pub final_uncertainty: Option<f64>,
    pub final_estimation_error: Option<f64>,
}

impl TrialRecord {
    fn new<P>(trial: usize, seed: u64, run: RunResult<P>, concentrability: Option<f64>, ratio_bound: Option<f64>) -> Self {
        let d = &run.diagnostics;
        Self {
            trial,
            seed,
            covered: d.covered(),
            eluder_sum: d.eluder_sum,
            eluder_bound: d.eluder_bound,
            final_uncertainty: d.final_uncertainty,
            final_estimation_error: d.final_estimation_error,
            final_gap: run.final_gap,
            final_lcb: run.final_lcb,
            per_episode_gap: run.per_episode_gap,
            cumulative_regret: run.cumulative_regret,
            cumulative_eluder: run.cumulative_eluder,
            concentrability,
            ratio_bound,
        }
    }

    pub fn total_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    pub fn eluder_ok(&self) -> bool {
        self.eluder_sum <= self.eluder_bound + 1e-9
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub trials: Vec<TrialRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub experiments: Vec<ExperimentResult>,
}

impl SuiteResult {
    pub fn get(&self, id: &str) -> Option<&ExperimentResult> {
        self.experiments.iter().find(|e| e.plan.id == id)
    }
}

pub fn trial_seed(config: &ExperimentConfig, trial: usize) -> u64 {
    config.base_seed.wrapping_add(trial as u64)
}

/// Offline data of a trial. Its generator runs on a separate stream of the
/// trial seed, so datasets of different sizes are nested prefixes.
fn offline_data(env: &BuiltEnv, behavior: &Behavior, n: usize, seed: u64) -> Result<Dataset, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Ok(match (env, behavior) {
        (_, Behavior::None) => Dataset::new(),
        (BuiltEnv::Bandit(model), Behavior::Arms(probs)) => collect_bandit(model, probs, n, &mut rng)?,
        (BuiltEnv::Tabular { env, .. }, Behavior::Policy(policy)) => collect_tabular(env, policy, n, &mut rng)?,
        (BuiltEnv::MountainCar { pools, .. }, Behavior::Mix(alpha)) => pools.mix(*alpha, n, seed)?,
        _ => unreachable!("behavior materialized for another environment"),
    })
}

fn run_trial(
    config: &ExperimentConfig,
    built: &BuiltEnv,
    plan: &ExperimentPlan,
    behavior: &Behavior,
    trial: usize,
) -> Result<TrialRecord, CliError> {
    let seed = trial_seed(config, trial);
    let offline = offline_data(built, behavior, plan.n_offline, seed)?;
    let run_config = HybridRunConfig {
        n_online: config.n_online,
        mode: config.mode,
        delta: config.oracle.delta,
        seed,
        refit: config.oracle.refit,
    };
    let scale = config.beta_scale();
    match built {
        BuiltEnv::Bandit(model) => {
            let lambda = config.oracle.lambda.expect("resolved config");
            let spec = ConfidenceSpec::new(scale, config.oracle.delta)?;
            let concentrability = match behavior {
                Behavior::Arms(probs) if !offline.is_empty() => {
                    let mut state = RidgeState::new(model.dim(), lambda)?;
                    state.absorb_batch(offline.trajectories().iter().map(|t| {
                        let s = t.steps[0];
                        (model.feature(s.state as usize, s.action as usize), s.reward)
                    }))?;
                    Some(concentrability_linear(&model.optimal_arms(), probs, state.gram(), model)?)
                }
                _ => None,
            };
            let mut oracle = LinUcbOracle::new(model.dim(), lambda, spec)?;
            let run = run_hybrid(model.as_ref(), &mut oracle, &offline, &run_config)?;
            Ok(TrialRecord::new(trial, seed, run, concentrability, None))
        }
        BuiltEnv::Tabular { env, .. } | BuiltEnv::MountainCar { env, .. } => {
            let shape = env.mdp().shape();
            let beta = TabularBonus::new(scale, config.oracle.delta)?.beta(shape, plan.n_offline + config.n_online);
            let known = config.oracle.known_rewards.unwrap_or(false).then(|| Arc::from(env.mdp().reward_table()));
            let (concentrability, ratio_bound) = match (env_optimal(built), behavior) {
                (Some(optimal), Behavior::Policy(policy)) if !offline.is_empty() => {
                    let counts = TabularCounts::from_dataset(shape, &offline)?;
                    let c = concentrability_tabular(optimal, policy, env.mdp(), counts.visits(), beta)?;
                    (Some(c.uncertainty_ratio), Some(c.ratio_bound))
                }
                _ => (None, None),
            };
            let mut oracle = UcbviOracle::new(shape, beta, known)?;
            let run = run_hybrid(env, &mut oracle, &offline, &run_config)?;
            Ok(TrialRecord::new(trial, seed, run, concentrability, ratio_bound))
        }
    }
}

fn env_optimal(env: &BuiltEnv) -> Option<&MarkovPolicy> {
    match env {
        BuiltEnv::Tabular { optimal, .. } => Some(optimal),
        _ => None,
    }
}

/// Runs all trials of all experiments on at most `jobs` threads. Results
/// are ordered by experiment then trial whatever the completion order.
pub fn run_suite(config: &ExperimentConfig, jobs: usize, cache: &EnvCache) -> Result<SuiteResult, CliError> {
    let env = build_environment(&config.environment, cache)?;
    run_suite_on(config, &env, jobs)
}

/// [`run_suite`] on an already built environment.
pub fn run_suite_on(config: &ExperimentConfig, env: &BuiltEnv, jobs: usize) -> Result<SuiteResult, CliError> {
    let plans = plan_experiments(config);
    let behaviors = plans
        .iter()
        .map(|p| materialize(env, p.behavior.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let work: Vec<(usize, usize)> =
        (0..plans.len()).flat_map(|e| (0..config.trials()).map(move |t| (e, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let records: Vec<Result<TrialRecord, CliError>> = pool.install(|| {
        work.par_iter().map(|&(e, t)| run_trial(config, env, &plans[e], &behaviors[e], t)).collect()
    });
    let mut experiments: Vec<ExperimentResult> =
        plans.into_iter().map(|plan| ExperimentResult { plan, trials: Vec::new() }).collect();
    for (&(e, _), record) in work.iter().zip(records) {
        experiments[e].trials.push(record?);
    }
    Ok(SuiteResult { experiments })
}
