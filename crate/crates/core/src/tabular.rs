//! Count-based model estimation for tabular MDPs, the per-cell bonus and
//! optimistic/pessimistic planning on the estimated model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{dim_check, Error, Result};
use crate::mdp::{
    evaluate_policy, plan_greedy, Dataset, Dynamics, MarkovPolicy, Shape, TabularMdp, Trajectory,
    TransitionRow,
};

type SuccessorRow = SmallVec<[(u32, u32); 2]>;

/// Visit, transition and reward counters `N_h(x, a)`, `N_h(x' | x, a)`.
///
/// The last step has no successor, so its transition counts stay empty.
/// Transition counts are 32-bit per successor.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularCounts {
    shape: Shape,
    visits: Vec<u64>,
    // Most cells have one or two successors; inline storage keeps planning
    // sweeps off the heap.
    successors: Vec<SuccessorRow>,
    reward_sums: Vec<f64>,
    initial: Vec<u64>,
    episodes: u64,
}

impl TabularCounts {
    pub fn new(shape: Shape) -> Self {
        Self {
            shape,
            visits: vec![0; shape.cells()],
            successors: vec![SuccessorRow::new(); shape.cells()],
            reward_sums: vec![0.0; shape.cells()],
            initial: vec![0; shape.num_states],
            episodes: 0,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    pub fn visit(&self, h: usize, x: usize, a: usize) -> u64 {
        self.visits[self.shape.index(h, x, a)]
    }

    pub fn reward_sum(&self, h: usize, x: usize, a: usize) -> f64 {
        self.reward_sums[self.shape.index(h, x, a)]
    }

    /// Observed successors of `(h, x, a)` with their counts, sorted by state.
    pub fn successors(&self, h: usize, x: usize, a: usize) -> &[(u32, u32)] {
        &self.successors[self.shape.index(h, x, a)]
    }

    pub fn transition(&self, h: usize, x: usize, a: usize, next: usize) -> u64 {
        let row = self.successors(h, x, a);
        match row.binary_search_by_key(&(next as u32), |&(s, _)| s) {
            Ok(i) => u64::from(row[i].1),
            Err(_) => 0,
        }
    }

    pub fn initial_counts(&self) -> &[u64] {
        &self.initial
    }

    /// Adds one trajectory and returns its eluder increment
    /// `sum_h 1 / max(1, N_h(x_h, a_h))` with counts taken after the update.
    pub fn absorb(&mut self, trajectory: &Trajectory) -> Result<f64> {
        trajectory.validate(self.shape)?;
        let s = self.shape;
        let steps = &trajectory.steps;
        self.initial[steps[0].state as usize] += 1;
        self.episodes += 1;
        let mut increment = 0.0;
        for (h, step) in steps.iter().enumerate() {
            let cell = s.index(h, step.state as usize, step.action as usize);
            self.visits[cell] += 1;
            self.reward_sums[cell] += step.reward;
            increment += 1.0 / self.visits[cell].max(1) as f64;
            if let Some(next) = steps.get(h + 1) {
                let row = &mut self.successors[cell];
                match row.binary_search_by_key(&next.state, |&(y, _)| y) {
                    Ok(i) => row[i].1 += 1,
                    Err(i) => row.insert(i, (next.state, 1)),
                }
            }
        }
        Ok(increment)
    }

    pub fn from_dataset(shape: Shape, dataset: &Dataset) -> Result<Self> {
        let mut counts = Self::new(shape);
        for traj in dataset.trajectories() {
            counts.absorb(traj)?;
        }
        Ok(counts)
    }
}

/// Bonus scale `beta = c H sqrt(ln(2 H |X| |A| n / delta))` with `n` the total
/// number of trajectories the run will see.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularBonus {
    pub scale: f64,
    pub delta: f64,
}

impl Default for TabularBonus {
    fn default() -> Self {
        Self { scale: 0.1, delta: 0.05 }
    }
}

impl TabularBonus {
    pub fn new(scale: f64, delta: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("bonus scale must be positive, got {scale}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { scale, delta })
    }

    pub fn beta(&self, shape: Shape, total_trajectories: usize) -> f64 {
        let n = total_trajectories.max(1) as f64;
        let h = shape.horizon as f64;
        let arg = 2.0 * h * shape.num_states as f64 * shape.num_actions as f64 * n / self.delta;
        self.scale * h * arg.ln().max(0.0).sqrt()
    }
}

/// An empirical model `(P_hat, r_hat, q_hat)` together with its bonus.
///
/// Unvisited cells get a uniform transition row, reward 0 and the capped bonus.
#[derive(Clone, Debug)]
pub struct EstimatedModel {
    counts: TabularCounts,
    beta: f64,
    known_rewards: Option<Arc<[f64]>>,
}

impl EstimatedModel {
    /// `known_rewards`, when given, replaces `r_hat` by the supplied mean
    /// rewards, one per `(h, x, a)` cell.
    pub fn new(counts: TabularCounts, beta: f64, known_rewards: Option<Arc<[f64]>>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("bonus scale must be positive, got {beta}")));
        }
        if let Some(r) = &known_rewards {
            dim_check("known rewards", counts.shape.cells(), r.len())?;
        }
        Ok(Self { counts, beta, known_rewards })
    }

    pub fn counts(&self) -> &TabularCounts {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut TabularCounts {
        &mut self.counts
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_visited(&self, h: usize, x: usize, a: usize) -> bool {
        self.counts.visit(h, x, a) > 0
    }

    pub fn reward_hat(&self, h: usize, x: usize, a: usize) -> f64 {
        let s = self.counts.shape;
        if let Some(r) = &self.known_rewards {
            return r[s.index(h, x, a)];
        }
        match self.counts.visit(h, x, a) {
            0 => 0.0,
            n => self.counts.reward_sum(h, x, a) / n as f64,
        }
    }

    /// `min(H - h, beta / sqrt(N))`, or the cap when unvisited.
    pub fn bonus(&self, h: usize, x: usize, a: usize) -> f64 {
        let cap = self.counts.shape.remaining(h);
        match self.counts.visit(h, x, a) {
            0 => cap,
            n => (self.beta / (n as f64).sqrt()).min(cap),
        }
    }

    pub fn p_hat(&self, h: usize, x: usize, a: usize, next: usize) -> f64 {
        match self.counts.visit(h, x, a) {
            0 => 1.0 / self.counts.shape.num_states as f64,
            n => self.counts.transition(h, x, a, next) as f64 / n as f64,
        }
    }

    /// Empirical initial-state distribution, uniform before any data.
    pub fn init_hat(&self) -> Vec<f64> {
        let nx = self.counts.shape.num_states;
        if self.counts.episodes == 0 {
            return vec![1.0 / nx as f64; nx];
        }
        let n = self.counts.episodes as f64;
        self.counts.initial.iter().map(|&c| c as f64 / n).collect()
    }

    /// Materializes `(P_hat, r_hat, q_hat)` as an MDP. The last step, which
    /// has no observed successors, gets uniform rows.
    pub fn mdp_hat(&self) -> Result<TabularMdp> {
        let s = self.counts.shape;
        let mut rows = Vec::with_capacity(s.cells());
        let mut rewards = Vec::with_capacity(s.cells());
        for h in 0..s.horizon {
            for x in 0..s.num_states {
                for a in 0..s.num_actions {
                    let n = self.counts.visit(h, x, a);
                    let row = if n == 0 || h + 1 == s.horizon {
                        TransitionRow::Uniform
                    } else {
                        TransitionRow::Sparse(
                            self.counts
                                .successors(h, x, a)
                                .iter()
                                .map(|&(y, c)| (y as usize, c as f64 / n as f64))
                                .collect(),
                        )
                    };
                    rows.push(row);
                    rewards.push(self.reward_hat(h, x, a));
                }
            }
        }
        TabularMdp::from_rows(s, false, rows, rewards, self.init_hat())
    }

    fn check_policy(&self, policy: &MarkovPolicy) -> Result<()> {
        if policy.shape() != self.counts.shape {
            return Err(Error::Dimension("policy shape does not match the model".into()));
        }
        Ok(())
    }

    /// `V_hat^pi` under the estimated model.
    pub fn value_estimate(&self, policy: &MarkovPolicy) -> Result<f64> {
        self.check_policy(policy)?;
        let root = evaluate_policy(self, policy, |h, x, a| self.reward_hat(h, x, a));
        Ok(self.initial_expect(&root))
    }
}

impl Dynamics for EstimatedModel {
    fn shape(&self) -> Shape {
        self.counts.shape
    }

    #[inline]
    fn expect(&self, h: usize, x: usize, a: usize, v: &[f64], v_mean: f64) -> f64 {
        let cell = self.counts.shape.index(h, x, a);
        match self.counts.visits[cell] {
            0 => v_mean,
            n => {
                let total: f64 = self.counts.successors[cell]
                    .iter()
                    .map(|&(y, c)| c as f64 * v[y as usize])
                    .sum();
                total / n as f64
            }
        }
    }

    fn initial_expect(&self, v: &[f64]) -> f64 {
        if self.counts.episodes == 0 {
            return v.iter().sum::<f64>() / v.len() as f64;
        }
        let total: f64 = self.counts.initial.iter().zip(v).map(|(&c, v)| c as f64 * v).sum();
        total / self.counts.episodes as f64
    }
}

/// Counts every trajectory of `dataset` into a fresh model.
pub fn estimate_model(dataset: &Dataset, shape: Shape, beta: f64) -> Result<EstimatedModel> {
    EstimatedModel::new(TabularCounts::from_dataset(shape, dataset)?, beta, None)
}

/// `E[sum_h min(H - h, beta / sqrt(N_h(x_h, a_h)))]` under `(P_hat, pi)`.
pub fn uncertainty_of_policy(model: &EstimatedModel, policy: &MarkovPolicy) -> Result<f64> {
    model.check_policy(policy)?;
    let root = evaluate_policy(model, policy, |h, x, a| model.bonus(h, x, a));
    Ok(model.initial_expect(&root))
}

fn plan(model: &EstimatedModel, optimistic: bool) -> (MarkovPolicy, f64) {
    let (actions, value) = plan_actions(model, optimistic);
    let policy = MarkovPolicy::deterministic(model.shape(), &actions).expect("greedy actions are in range");
    (policy, value)
}

/// Greedy policy of the bonus-augmented DP and its root value.
pub fn optimistic_plan(model: &EstimatedModel) -> (MarkovPolicy, f64) {
    plan(model, true)
}

/// Greedy policy of the bonus-penalized DP (stage rewards floored at 0).
pub fn pessimistic_plan(model: &EstimatedModel) -> (MarkovPolicy, f64) {
    plan(model, false)
}

/// Raw greedy actions, one per `(h, x)`, for callers that avoid building a
/// full policy table.
pub(crate) fn plan_actions(model: &EstimatedModel, optimistic: bool) -> (Vec<usize>, f64) {
    let result = if optimistic {
        plan_greedy(model, |h, x, a| model.reward_hat(h, x, a) + model.bonus(h, x, a), true, false)
    } else {
        plan_greedy(model, |h, x, a| (model.reward_hat(h, x, a) - model.bonus(h, x, a)).max(0.0), true, false)
    };
    (result.actions, model.initial_expect(&result.root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::tests::{random_mdp, random_policy};
    use crate::mdp::{optimal_policy, sample_trajectory, value_of_policy, RewardModel, Step};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_dataset(mdp: &TabularMdp, pi: &MarkovPolicy, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::offline((0..n).map(|_| sample_trajectory(mdp, pi, RewardModel::Bernoulli, &mut rng)).collect())
    }

    /// Single-step model with two actions and chosen counts and mean rewards.
    fn two_arm_model(counts: [u64; 2], means: [f64; 2], beta: f64) -> EstimatedModel {
        let shape = Shape::new(2, 2, 1).unwrap();
        let mut c = TabularCounts::new(shape);
        for a in 0..2 {
            let cell = shape.index(0, 0, a);
            c.visits[cell] = counts[a];
            c.reward_sums[cell] = means[a] * counts[a] as f64;
        }
        c.initial[0] = 1;
        c.episodes = 1;
        EstimatedModel::new(c, beta, None).unwrap()
    }

    #[test]
    fn empty_dataset_conventions() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let m = estimate_model(&Dataset::new(), shape, 1.0).unwrap();
        assert_eq!(m.p_hat(0, 1, 1, 2), 1.0 / 3.0);
        assert_eq!(m.reward_hat(1, 0, 0), 0.0);
        let u = uncertainty_of_policy(&m, &MarkovPolicy::uniform(shape)).unwrap();
        assert!((u - 6.0).abs() < 1e-12);
        assert!((optimistic_plan(&m).1 - 3.0).abs() < 1e-12);
        assert_eq!(pessimistic_plan(&m).1, 0.0);
    }

    #[test]
    fn single_sample_reward() {
        let shape = Shape::new(2, 2, 2).unwrap();
        let traj = Trajectory::new(vec![Step::new(1, 0, 0.7), Step::new(0, 1, 0.2)]);
        let m = estimate_model(&Dataset::offline(vec![traj]), shape, 1.0).unwrap();
        assert!((m.reward_hat(0, 1, 0) - 0.7).abs() < 1e-15);
        assert_eq!(m.p_hat(0, 1, 0, 0), 1.0);
    }

    #[test]
    fn transition_estimates_within_binomial_ci() {
        let shape = Shape::new(2, 2, 2).unwrap();
        let mdp = random_mdp(shape, 8);
        let pi = MarkovPolicy::uniform(shape);
        let data = sample_dataset(&mdp, &pi, 10_000, 1);
        let m = estimate_model(&data, shape, 1.0).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                let n = m.counts().visit(0, x, a) as f64;
                for y in 0..2 {
                    let p = mdp.transition_prob(0, x, a, y);
                    let tol = 3.0 * (p * (1.0 - p) / n).sqrt();
                    assert!((m.p_hat(0, x, a, y) - p).abs() <= tol);
                }
            }
        }
    }

    #[test]
    fn huge_counts_vanish_bonus() {
        let shape = Shape::new(2, 2, 2).unwrap();
        let mut c = TabularCounts::new(shape);
        c.visits.iter_mut().for_each(|v| *v = 1_000_000_000);
        let m = EstimatedModel::new(c, 1.0, None).unwrap();
        let u = uncertainty_of_policy(&m, &MarkovPolicy::uniform(shape)).unwrap();
        assert!(u < 1e-4);
    }

    #[test]
    fn uniform_counts_closed_form() {
        let shape = Shape::new(3, 2, 4).unwrap();
        let mut c = TabularCounts::new(shape);
        c.visits.iter_mut().for_each(|v| *v = 900);
        c.successors.iter_mut().for_each(|s| *s = SuccessorRow::from_slice(&[(0, 300), (1, 300), (2, 300)]));
        let beta = 2.0;
        let m = EstimatedModel::new(c, beta, None).unwrap();
        for seed in 0..5 {
            let u = uncertainty_of_policy(&m, &random_policy(shape, seed)).unwrap();
            assert!((u - beta * 4.0 / 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_evaluated_ucb_and_lcb() {
        let m = two_arm_model([100, 1], [0.5, 0.4], 1.0);
        let (opt, ucb) = optimistic_plan(&m);
        assert_eq!(opt.prob(0, 0, 1), 1.0);
        assert!((ucb - 1.0).abs() < 1e-12);
        let (pes, lcb) = pessimistic_plan(&m);
        assert_eq!(pes.prob(0, 0, 0), 1.0);
        assert!((lcb - 0.4).abs() < 1e-12);
    }

    #[test]
    fn known_model_recovers_optimum() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let mdp = random_mdp(shape, 17);
        let mut c = TabularCounts::new(shape);
        let scale = 1u64 << 31;
        for h in 0..3 {
            for x in 0..3 {
                for a in 0..2 {
                    let cell = shape.index(h, x, a);
                    c.visits[cell] = scale;
                    c.reward_sums[cell] = mdp.reward(h, x, a) * scale as f64;
                    if h + 1 < 3 {
                        let mut assigned = 0;
                        for y in 0..3 {
                            let k = if y == 2 { scale - assigned } else { (mdp.transition_prob(h, x, a, y) * scale as f64).round() as u64 };
                            assigned += k;
                            c.successors[cell].push((y as u32, k as u32));
                        }
                    }
                }
            }
        }
        for x in 0..3 {
            c.initial[x] = (mdp.init_dist()[x] * scale as f64).round() as u64;
        }
        c.episodes = c.initial.iter().sum();
        let m = EstimatedModel::new(c, 1e-9, None).unwrap();
        let star = optimal_policy(&mdp);
        let (pes, lcb) = pessimistic_plan(&m);
        let (opt, _) = optimistic_plan(&m);
        assert_eq!(pes, star.policy);
        assert_eq!(opt, star.policy);
        assert!((lcb - star.value).abs() < 1e-6);
    }

    #[test]
    fn mdp_hat_matches_dynamics_view() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let mdp = random_mdp(shape, 2);
        let pi = random_policy(shape, 4);
        let data = sample_dataset(&mdp, &pi, 30, 5);
        let m = estimate_model(&data, shape, 0.5).unwrap();
        let v_direct = m.value_estimate(&pi).unwrap();
        let v_materialized = value_of_policy(&m.mdp_hat().unwrap(), &pi).unwrap();
        assert!((v_direct - v_materialized).abs() < 1e-12);
    }

    #[test]
    fn known_rewards_substitute() {
        let shape = Shape::new(2, 2, 2).unwrap();
        let mdp = random_mdp(shape, 2);
        let r: Arc<[f64]> = mdp.reward_table().into();
        let m = EstimatedModel::new(TabularCounts::new(shape), 1.0, Some(r)).unwrap();
        assert_eq!(m.reward_hat(1, 1, 0), mdp.reward(1, 1, 0));
    }

    #[test]
    fn beta_formula() {
        let shape = Shape::new(5, 10, 3).unwrap();
        let b = TabularBonus::default().beta(shape, 3000);
        let expected = 0.1 * 3.0 * (2.0f64 * 3.0 * 5.0 * 10.0 * 3000.0 / 0.05).ln().sqrt();
        assert!((b - expected).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn counts_and_planning_invariants(seed in 0u64..10_000, n in 0usize..40, beta in 0.05f64..3.0) {
            let shape = Shape::new(3, 2, 3).unwrap();
            let mdp = random_mdp(shape, seed);
            let pi = random_policy(shape, seed + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
            let mut m = EstimatedModel::new(TabularCounts::new(shape), beta, None).unwrap();
            let mut prev_bonus: Vec<f64> = (0..shape.cells()).map(|i| {
                let (h, rest) = (i / 6, i % 6);
                m.bonus(h, rest / 2, rest % 2)
            }).collect();
            for _ in 0..n {
                let traj = sample_trajectory(&mdp, &pi, RewardModel::Bernoulli, &mut rng);
                m.counts_mut().absorb(&traj).unwrap();
                for h in 0..3 { for x in 0..3 { for a in 0..2 {
                    let b = m.bonus(h, x, a);
                    let i = shape.index(h, x, a);
                    prop_assert!(b <= prev_bonus[i]);
                    prev_bonus[i] = b;
                }}}
            }
            let c = m.counts();
            for h in 0..2 { for x in 0..3 { for a in 0..2 {
                let total: u64 = c.successors(h, x, a).iter().map(|&(_, k)| u64::from(k)).sum();
                prop_assert_eq!(total, c.visit(h, x, a));
                let rs = c.reward_sum(h, x, a);
                prop_assert!(rs >= 0.0 && rs <= c.visit(h, x, a) as f64);
            }}}
            let (_, ucb) = optimistic_plan(&m);
            let (_, lcb) = pessimistic_plan(&m);
            prop_assert!(lcb <= ucb);
            prop_assert!(uncertainty_of_policy(&m, &pi).unwrap() >= 0.0);
        }
    }
}
