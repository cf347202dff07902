//! Tabular Mountain Car: a position/velocity grid plus one absorbing-reward
//! goal state, and the two-pool offline collector.
//!
//! Each grid cell's transition row is obtained by pushing a `K x K` lattice of
//! points inside the cell through the continuous dynamics and tallying the
//! destination cells. A single point per cell would leave the car stuck,
//! because one step changes the velocity by less than a velocity bin.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Dataset, Shape, Step, TabularMdp, Trajectory, TransitionRow};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const GOAL_POSITION: f64 = 0.5;
pub const MAX_SPEED: f64 = 0.07;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const NUM_ACTIONS: usize = 3;

/// One step of the continuous dynamics; action 0 pushes left, 1 coasts, 2 pushes right.
pub fn physics_step(position: f64, velocity: f64, action: usize) -> (f64, f64) {
    let mut v = velocity + (action as f64 - 1.0) * FORCE - (3.0 * position).cos() * GRAVITY;
    v = v.clamp(-MAX_SPEED, MAX_SPEED);
    let p = (position + v).clamp(MIN_POSITION, MAX_POSITION);
    if p <= MIN_POSITION && v < 0.0 {
        v = 0.0;
    }
    (p, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainCarSpec {
    pub position_bins: usize,
    pub velocity_bins: usize,
    /// Lattice points per axis used to estimate each cell's transition row.
    pub subsamples: usize,
    pub horizon: usize,
}

impl Default for MountainCarSpec {
    fn default() -> Self {
        Self { position_bins: 30, velocity_bins: 30, subsamples: 5, horizon: 200 }
    }
}

impl MountainCarSpec {
    fn validate(&self) -> Result<()> {
        if self.position_bins == 0 || self.velocity_bins == 0 || self.subsamples == 0 || self.horizon == 0 {
            return Err(Error::Config("mountain car grid sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.position_bins * self.velocity_bins + 1
    }

    pub fn goal_state(&self) -> usize {
        self.position_bins * self.velocity_bins
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.num_states(), NUM_ACTIONS, self.horizon)
    }

    fn position_width(&self) -> f64 {
        (GOAL_POSITION - MIN_POSITION) / self.position_bins as f64
    }

    fn velocity_width(&self) -> f64 {
        2.0 * MAX_SPEED / self.velocity_bins as f64
    }

    fn velocity_bin(&self, v: f64) -> usize {
        (((v + MAX_SPEED) / self.velocity_width()).floor().max(0.0) as usize).min(self.velocity_bins - 1)
    }

    fn position_bin(&self, p: f64) -> usize {
        (((p - MIN_POSITION) / self.position_width()).floor().max(0.0) as usize).min(self.position_bins - 1)
    }

    /// Grid state of a continuous point; positions past the goal map to the goal state.
    pub fn state_of(&self, position: f64, velocity: f64) -> usize {
        if position > GOAL_POSITION {
            return self.goal_state();
        }
        self.position_bin(position) * self.velocity_bins + self.velocity_bin(velocity)
    }

    /// Position bin of a grid state, `None` for the goal.
    pub fn position_of(&self, state: usize) -> Option<usize> {
        (state < self.goal_state()).then(|| state / self.velocity_bins)
    }

    /// Start positions uniform on `[-0.6, -0.4]` with zero velocity, spread
    /// over the position bins by overlap length.
    pub fn init_dist(&self) -> Vec<f64> {
        let (lo, hi): (f64, f64) = (-0.6, -0.4);
        let w = self.position_width();
        let j = self.velocity_bin(0.0);
        let mut dist = vec![0.0; self.num_states()];
        for i in 0..self.position_bins {
            let a = MIN_POSITION + i as f64 * w;
            let overlap = (hi.min(a + w) - lo.max(a)).max(0.0);
            dist[i * self.velocity_bins + j] = overlap / (hi - lo);
        }
        let total: f64 = dist.iter().sum();
        dist.iter_mut().for_each(|v| *v /= total);
        dist
    }
}

/// Builds the stationary tabular MDP. Any action in the goal state earns
/// reward 1 and restarts from the initial distribution.
pub fn build_mountain_car(spec: &MountainCarSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let shape = spec.shape()?;
    let k = spec.subsamples;
    let (wp, wv) = (spec.position_width(), spec.velocity_width());
    let init = spec.init_dist();
    let mut rows = Vec::with_capacity(shape.num_states * NUM_ACTIONS);
    let mut rewards = Vec::with_capacity(shape.num_states * NUM_ACTIONS);
    let mut tally = vec![0usize; shape.num_states];
    for i in 0..spec.position_bins {
        for j in 0..spec.velocity_bins {
            for a in 0..NUM_ACTIONS {
                let mut touched = Vec::new();
                for u in 0..k {
                    for w in 0..k {
                        let p = MIN_POSITION + (i as f64 + (u as f64 + 0.5) / k as f64) * wp;
                        let v = -MAX_SPEED + (j as f64 + (w as f64 + 0.5) / k as f64) * wv;
                        let (p2, v2) = physics_step(p, v, a);
                        let s = spec.state_of(p2, v2);
                        if tally[s] == 0 {
                            touched.push(s);
                        }
                        tally[s] += 1;
                    }
                }
                touched.sort_unstable();
                let total = (k * k) as f64;
                let row = touched.iter().map(|&s| (s, std::mem::take(&mut tally[s]) as f64 / total)).collect();
                rows.push(TransitionRow::Sparse(row));
                rewards.push(0.0);
            }
        }
    }
    let reset: Vec<(usize, f64)> = init.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
    for _ in 0..NUM_ACTIONS {
        rows.push(TransitionRow::Sparse(reset.clone()));
        rewards.push(1.0);
    }
    TabularMdp::from_rows(shape, true, rows, rewards, init)
}

/// Samples a trajectory of a stationary deterministic policy.
pub fn sample_stationary<R: Rng + ?Sized>(mdp: &TabularMdp, actions: &[usize], rng: &mut R) -> Trajectory {
    let horizon = mdp.horizon();
    let mut steps = Vec::with_capacity(horizon);
    let mut x = mdp.sample_initial(rng);
    for h in 0..horizon {
        let a = actions[x];
        steps.push(Step::new(x, a, mdp.reward(h, x, a)));
        if h + 1 < horizon {
            x = mdp.sample_next(h, x, a, rng);
        }
    }
    Trajectory::new(steps)
}

/// Settings of the two-pool collector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectorConfig {
    pub iterations: usize,
    pub gamma: f64,
    /// Value-iteration sweeps per iteration, warm-started from the previous iterate.
    pub sweeps: usize,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self { iterations: 10_000, gamma: 0.99, sweeps: 20 }
    }
}

/// Per-iteration goal visits of the exploration and exploitation trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub exploration_goal_visits: u32,
    pub exploitation_goal_visits: u32,
}

#[derive(Clone, Debug)]
pub struct CollectorOutput {
    /// Pool of trajectories from the bonus-greedy policies.
    pub exploration: Vec<Trajectory>,
    /// Pool of trajectories from the reward-greedy policies.
    pub exploitation: Vec<Trajectory>,
    pub stats: Vec<IterationStats>,
}

impl CollectorOutput {
    /// Offline dataset with `round(alpha n)` exploitation trajectories and the
    /// rest from the exploration pool, each drawn without replacement.
    pub fn mix(&self, alpha: f64, n_offline: usize, seed: u64) -> Result<Dataset> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Range(format!("alpha {alpha} outside [0, 1]")));
        }
        let n_exploit = (alpha * n_offline as f64).round() as usize;
        let n_explore = n_offline - n_exploit;
        if n_exploit > self.exploitation.len() || n_explore > self.exploration.len() {
            return Err(Error::Config(format!(
                "cannot draw {n_exploit} + {n_explore} trajectories from pools of {} and {}",
                self.exploitation.len(),
                self.exploration.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n_offline);
        for i in sample(&mut rng, self.exploitation.len(), n_exploit).into_vec() {
            out.push(self.exploitation[i].clone());
        }
        for i in sample(&mut rng, self.exploration.len(), n_explore).into_vec() {
            out.push(self.exploration[i].clone());
        }
        Ok(Dataset::offline(out))
    }
}

/// Pooled `(x, a) -> x'` counts of a stationary model.
struct StationaryCounts {
    num_actions: usize,
    visits: Vec<u64>,
    successors: Vec<Vec<(u32, u64)>>,
}

impl StationaryCounts {
    fn new(num_states: usize, num_actions: usize) -> Self {
        let n = num_states * num_actions;
        Self { num_actions, visits: vec![0; n], successors: vec![Vec::new(); n] }
    }

    fn absorb(&mut self, traj: &Trajectory) {
        for pair in traj.steps.windows(2) {
            let cell = pair[0].state as usize * self.num_actions + pair[0].action as usize;
            self.visits[cell] += 1;
            let row = &mut self.successors[cell];
            match row.binary_search_by_key(&pair[1].state, |&(s, _)| s) {
                Ok(i) => row[i].1 += 1,
                Err(i) => row.insert(i, (pair[1].state, 1)),
            }
        }
    }

    fn bonus(&self, cell: usize) -> f64 {
        match self.visits[cell] {
            0 => 1.0,
            n => 1.0 / (n as f64).sqrt(),
        }
    }
}

/// Warm-started discounted value iteration on the count model; unvisited
/// pairs move uniformly.
fn value_iteration(counts: &StationaryCounts, stage: &[f64], gamma: f64, sweeps: usize, q: &mut [f64]) {
    let na = counts.num_actions;
    let nx = q.len() / na;
    let mut v = vec![0.0; nx];
    for _ in 0..sweeps {
        for x in 0..nx {
            v[x] = q[x * na..(x + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        let v_mean = v.iter().sum::<f64>() / nx as f64;
        for (cell, qv) in q.iter_mut().enumerate() {
            let future = match counts.visits[cell] {
                0 => v_mean,
                n => counts.successors[cell].iter().map(|&(y, c)| c as f64 * v[y as usize]).sum::<f64>() / n as f64,
            };
            *qv = stage[cell] + gamma * future;
        }
    }
}

fn greedy(q: &[f64], na: usize) -> Vec<usize> {
    q.chunks(na).map(crate::bandit::argmax).collect()
}

fn goal_visits(traj: &Trajectory, goal: usize) -> u32 {
    traj.steps.iter().filter(|s| s.state as usize == goal).count() as u32
}

/// Runs the collector: each iteration plans a bonus-greedy and a
/// reward-greedy policy on the model estimated from the exploration pool and
/// adds one trajectory of each to its pool.
pub fn collect_pools(spec: &MountainCarSpec, mdp: &TabularMdp, config: &CollectorConfig, seed: u64) -> Result<CollectorOutput> {
    if !(config.gamma > 0.0 && config.gamma < 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", config.gamma)));
    }
    let (nx, na) = (mdp.num_states(), mdp.num_actions());
    let goal = spec.goal_state();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = StationaryCounts::new(nx, na);
    let reward: Vec<f64> = (0..nx * na).map(|c| mdp.reward(0, c / na, c % na)).collect();
    let mut bonus = vec![1.0; nx * na];
    let mut q_b = vec![0.0; nx * na];
    let mut q_r = vec![0.0; nx * na];
    let mut out = CollectorOutput {
        exploration: Vec::with_capacity(config.iterations),
        exploitation: Vec::with_capacity(config.iterations),
        stats: Vec::with_capacity(config.iterations),
    };
    for _ in 0..config.iterations {
        value_iteration(&counts, &bonus, config.gamma, config.sweeps, &mut q_b);
        value_iteration(&counts, &reward, config.gamma, config.sweeps, &mut q_r);
        let tau = sample_stationary(mdp, &greedy(&q_b, na), &mut rng);
        let tau_prime = sample_stationary(mdp, &greedy(&q_r, na), &mut rng);
        out.stats.push(IterationStats {
            exploration_goal_visits: goal_visits(&tau, goal),
            exploitation_goal_visits: goal_visits(&tau_prime, goal),
        });
        counts.absorb(&tau);
        for step in &tau.steps {
            let cell = step.state as usize * na + step.action as usize;
            bonus[cell] = counts.bonus(cell);
        }
        out.exploration.push(tau);
        out.exploitation.push(tau_prime);
    }
    Ok(out)
}

/// Collector run followed by [`CollectorOutput::mix`].
pub fn mountain_car_offline_collect(
    spec: &MountainCarSpec,
    config: &CollectorConfig,
    alpha: f64,
    n_offline: usize,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Range(format!("alpha {alpha} outside [0, 1]")));
    }
    if n_offline > config.iterations {
        return Err(Error::Config(format!("n_offline {n_offline} exceeds {} iterations", config.iterations)));
    }
    let mdp = build_mountain_car(spec)?;
    collect_pools(spec, &mdp, config, seed)?.mix(alpha, n_offline, seed.wrapping_add(1))
}

/// Number of distinct states visited by a set of trajectories.
pub fn distinct_states(trajectories: &[Trajectory]) -> usize {
    let mut seen = std::collections::HashSet::new();
    for t in trajectories {
        seen.extend(t.steps.iter().map(|s| s.state));
    }
    seen.len()
}
