//! Episodic tabular MDPs: exact evaluation, planning, occupancy measures,
//! trajectory sampling and the two learning metrics.
//!
//! Steps are indexed from 0 to `horizon - 1`; at step `h` the maximal
//! remaining return is `horizon - h`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};

/// Absolute tolerance for every probability-vector validation.
pub const PROB_TOL: f64 = 1e-9;

/// Dimensions of an episodic tabular problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
}

impl Shape {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::Config(format!(
                "shape must be positive, got |X|={num_states} |A|={num_actions} H={horizon}"
            )));
        }
        Ok(Self { num_states, num_actions, horizon })
    }

    /// Number of `(h, x, a)` cells.
    pub fn cells(&self) -> usize {
        self.horizon * self.num_states * self.num_actions
    }

    #[inline]
    pub fn index(&self, h: usize, x: usize, a: usize) -> usize {
        (h * self.num_states + x) * self.num_actions + a
    }

    /// Maximal return obtainable from step `h` onward.
    #[inline]
    pub fn remaining(&self, h: usize) -> f64 {
        (self.horizon - h) as f64
    }
}

pub(crate) fn check_distribution(what: &str, p: &[f64]) -> Result<()> {
    let mut total = 0.0;
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Probability(format!("{what}: entry {i} is {v}")));
        }
        total += v;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::Probability(format!("{what}: sums to {total}")));
    }
    Ok(())
}

/// One transition row `P_h(.|x, a)` as supplied to the constructors.
#[derive(Clone, Debug, PartialEq)]
pub enum TransitionRow {
    /// `(next_state, probability)` pairs; absent states have probability 0.
    Sparse(Vec<(usize, f64)>),
    /// Uniform over all states.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum RowSlot {
    Sparse { start: usize, end: usize },
    Uniform,
}

/// Borrowed view of a transition row.
#[derive(Clone, Copy, Debug)]
pub enum NextStates<'a> {
    Sparse { states: &'a [usize], probs: &'a [f64] },
    Uniform(usize),
}

/// Common interface of the true MDP and count-based estimates, used by the
/// dynamic-programming routines.
pub trait Dynamics {
    fn shape(&self) -> Shape;

    /// `E[v(x') | h, x, a]`. `v_mean` must be the plain average of `v`; rows
    /// that are uniform use it directly.
    fn expect(&self, h: usize, x: usize, a: usize, v: &[f64], v_mean: f64) -> f64;

    /// `E[v(x_1)]` under the initial-state distribution.
    fn initial_expect(&self, v: &[f64]) -> f64;
}

/// Full specification of an episodic finite MDP.
///
/// A `stationary` MDP stores one set of rows and rewards shared by every step.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    shape: Shape,
    stationary: bool,
    slots: Vec<RowSlot>,
    next: Vec<usize>,
    prob: Vec<f64>,
    rewards: Vec<f64>,
    init_dist: Vec<f64>,
}

impl TabularMdp {
    /// Builds an MDP from explicit rows. `rows` and `rewards` are indexed by
    /// `(h, x, a)` (by `(x, a)` alone when `stationary`).
    pub fn from_rows(
        shape: Shape,
        stationary: bool,
        rows: Vec<TransitionRow>,
        rewards: Vec<f64>,
        init_dist: Vec<f64>,
    ) -> Result<Self> {
        let steps = if stationary { 1 } else { shape.horizon };
        let expected = steps * shape.num_states * shape.num_actions;
        dim_check("transition rows", expected, rows.len())?;
        dim_check("rewards", expected, rewards.len())?;
        dim_check("initial distribution", shape.num_states, init_dist.len())?;
        check_distribution("initial distribution", &init_dist)?;
        for (i, &r) in rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Range(format!("reward {i} is {r}, outside [0, 1]")));
            }
        }

        let mut slots = Vec::with_capacity(rows.len());
        let mut next = Vec::new();
        let mut prob = Vec::new();
        for (i, row) in rows.into_iter().enumerate() {
            match row {
                TransitionRow::Uniform => slots.push(RowSlot::Uniform),
                TransitionRow::Sparse(mut entries) => {
                    entries.sort_by_key(|&(s, _)| s);
                    let mut total = 0.0;
                    let start = next.len();
                    let mut last = None;
                    for (s, p) in entries {
                        if s >= shape.num_states {
                            return Err(Error::Dimension(format!(
                                "row {i}: next state {s} out of range"
                            )));
                        }
                        if !p.is_finite() || p < 0.0 {
                            return Err(Error::Probability(format!("row {i}: probability {p}")));
                        }
                        if last == Some(s) {
                            return Err(Error::Probability(format!(
                                "row {i}: duplicate next state {s}"
                            )));
                        }
                        last = Some(s);
                        total += p;
                        if p > 0.0 {
                            next.push(s);
                            prob.push(p);
                        }
                    }
                    if (total - 1.0).abs() > PROB_TOL {
                        return Err(Error::Probability(format!("row {i}: sums to {total}")));
                    }
                    slots.push(RowSlot::Sparse { start, end: next.len() });
                }
            }
        }
        Ok(Self { shape, stationary, slots, next, prob, rewards, init_dist })
    }

    /// Builds a non-stationary MDP from a dense `H x X x A x X` transition tensor.
    pub fn from_dense(
        shape: Shape,
        transitions: &[f64],
        rewards: Vec<f64>,
        init_dist: Vec<f64>,
    ) -> Result<Self> {
        let x = shape.num_states;
        dim_check("dense transitions", shape.cells() * x, transitions.len())?;
        let rows = transitions
            .chunks(x)
            .map(|row| TransitionRow::Sparse(row.iter().copied().enumerate().collect()))
            .collect();
        Self::from_rows(shape, false, rows, rewards, init_dist)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn num_states(&self) -> usize {
        self.shape.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.shape.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn init_dist(&self) -> &[f64] {
        &self.init_dist
    }

    #[inline]
    fn slot_index(&self, h: usize, x: usize, a: usize) -> usize {
        let step = if self.stationary { 0 } else { h };
        self.shape.index(step, x, a)
    }

    #[inline]
    pub fn reward(&self, h: usize, x: usize, a: usize) -> f64 {
        self.rewards[self.slot_index(h, x, a)]
    }

    /// Mean rewards expanded to one entry per `(h, x, a)` cell.
    pub fn reward_table(&self) -> Vec<f64> {
        let s = self.shape;
        let mut out = Vec::with_capacity(s.cells());
        for h in 0..s.horizon {
            for x in 0..s.num_states {
                for a in 0..s.num_actions {
                    out.push(self.reward(h, x, a));
                }
            }
        }
        out
    }

    pub fn next_states(&self, h: usize, x: usize, a: usize) -> NextStates<'_> {
        match self.slots[self.slot_index(h, x, a)] {
            RowSlot::Sparse { start, end } => NextStates::Sparse {
                states: &self.next[start..end],
                probs: &self.prob[start..end],
            },
            RowSlot::Uniform => NextStates::Uniform(self.shape.num_states),
        }
    }

    /// `P_h(next | x, a)`.
    pub fn transition_prob(&self, h: usize, x: usize, a: usize, next: usize) -> f64 {
        match self.next_states(h, x, a) {
            NextStates::Sparse { states, probs } => match states.binary_search(&next) {
                Ok(i) => probs[i],
                Err(_) => 0.0,
            },
            NextStates::Uniform(n) => 1.0 / n as f64,
        }
    }

    /// The transition row as originally supplied (zero entries dropped).
    pub fn row(&self, h: usize, x: usize, a: usize) -> TransitionRow {
        match self.next_states(h, x, a) {
            NextStates::Sparse { states, probs } => {
                TransitionRow::Sparse(states.iter().copied().zip(probs.iter().copied()).collect())
            }
            NextStates::Uniform(_) => TransitionRow::Uniform,
        }
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.init_dist, rng)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, h: usize, x: usize, a: usize, rng: &mut R) -> usize {
        match self.next_states(h, x, a) {
            NextStates::Sparse { states, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (&s, &p) in states.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return s;
                    }
                }
                *states.last().expect("validated rows are nonempty")
            }
            NextStates::Uniform(n) => rng.random_range(0..n),
        }
    }

    fn check_policy(&self, policy: &MarkovPolicy) -> Result<()> {
        if policy.shape() != self.shape {
            return Err(Error::Dimension(format!(
                "policy shape {:?} does not match MDP shape {:?}",
                policy.shape(),
                self.shape
            )));
        }
        Ok(())
    }
}

impl Dynamics for TabularMdp {
    fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    fn expect(&self, h: usize, x: usize, a: usize, v: &[f64], v_mean: f64) -> f64 {
        match self.next_states(h, x, a) {
            NextStates::Sparse { states, probs } => {
                states.iter().zip(probs).map(|(&s, &p)| p * v[s]).sum()
            }
            NextStates::Uniform(_) => v_mean,
        }
    }

    fn initial_expect(&self, v: &[f64]) -> f64 {
        self.init_dist.iter().zip(v).map(|(p, v)| p * v).sum()
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RowRepr {
    Entries(Vec<(usize, f64)>),
    Tag(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpRepr {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    #[serde(default)]
    stationary: bool,
    transitions: Vec<RowRepr>,
    rewards: Vec<f64>,
    init_dist: Vec<f64>,
}

impl TryFrom<MdpRepr> for TabularMdp {
    type Error = Error;

    fn try_from(repr: MdpRepr) -> Result<Self> {
        let shape = Shape::new(repr.num_states, repr.num_actions, repr.horizon)?;
        let steps = if repr.stationary { 1 } else { shape.horizon };
        // Reject absurd sizes before allocating anything proportional to them.
        let cells = steps
            .checked_mul(shape.num_states)
            .and_then(|v| v.checked_mul(shape.num_actions))
            .ok_or_else(|| Error::Dimension("MDP shape overflows".into()))?;
        dim_check("transition rows", cells, repr.transitions.len())?;
        let rows = repr
            .transitions
            .into_iter()
            .map(|row| match row {
                RowRepr::Entries(entries) => Ok(TransitionRow::Sparse(entries)),
                RowRepr::Tag(tag) if tag == "uniform" => Ok(TransitionRow::Uniform),
                RowRepr::Tag(tag) => Err(Error::Config(format!("unknown row tag {tag:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        TabularMdp::from_rows(shape, repr.stationary, rows, repr.rewards, repr.init_dist)
    }
}

impl From<&TabularMdp> for MdpRepr {
    fn from(mdp: &TabularMdp) -> Self {
        let transitions = (0..mdp.slots.len())
            .map(|i| match mdp.slots[i] {
                RowSlot::Uniform => RowRepr::Tag("uniform".into()),
                RowSlot::Sparse { start, end } => RowRepr::Entries(
                    mdp.next[start..end]
                        .iter()
                        .copied()
                        .zip(mdp.prob[start..end].iter().copied())
                        .collect(),
                ),
            })
            .collect();
        MdpRepr {
            num_states: mdp.shape.num_states,
            num_actions: mdp.shape.num_actions,
            horizon: mdp.shape.horizon,
            stationary: mdp.stationary,
            transitions,
            rewards: mdp.rewards.clone(),
            init_dist: mdp.init_dist.clone(),
        }
    }
}

impl Serialize for TabularMdp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MdpRepr::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TabularMdp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MdpRepr::deserialize(deserializer)?;
        TabularMdp::try_from(repr).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Policies, trajectories, datasets

/// Per-step stochastic action maps `pi_h(a | x)`.
///
/// Deterministic policies keep one action per `(h, x)` instead of a full
/// probability table.
#[derive(Clone, Debug)]
pub struct MarkovPolicy {
    shape: Shape,
    table: PolicyTable,
}

#[derive(Clone, Debug)]
enum PolicyTable {
    Stochastic(Vec<f64>),
    Deterministic(Vec<u32>),
}

impl MarkovPolicy {
    pub fn new(shape: Shape, probs: Vec<f64>) -> Result<Self> {
        dim_check("policy probabilities", shape.cells(), probs.len())?;
        for (i, row) in probs.chunks(shape.num_actions).enumerate() {
            check_distribution(&format!("policy row {i}"), row)?;
        }
        Ok(Self { shape, table: PolicyTable::Stochastic(probs) })
    }

    /// Deterministic policy from one action per `(h, x)`.
    pub fn deterministic(shape: Shape, actions: &[usize]) -> Result<Self> {
        dim_check("policy actions", shape.horizon * shape.num_states, actions.len())?;
        if let Some(&a) = actions.iter().find(|&&a| a >= shape.num_actions) {
            return Err(Error::Dimension(format!("action {a} out of range")));
        }
        let actions = actions.iter().map(|&a| a as u32).collect();
        Ok(Self { shape, table: PolicyTable::Deterministic(actions) })
    }

    pub fn uniform(shape: Shape) -> Self {
        let p = 1.0 / shape.num_actions as f64;
        Self { shape, table: PolicyTable::Stochastic(vec![p; shape.cells()]) }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn prob(&self, h: usize, x: usize, a: usize) -> f64 {
        match &self.table {
            PolicyTable::Stochastic(p) => p[self.shape.index(h, x, a)],
            PolicyTable::Deterministic(acts) => f64::from(acts[h * self.shape.num_states + x] as usize == a),
        }
    }

    /// The chosen action at `(h, x)` if the policy is deterministic there.
    pub fn action(&self, h: usize, x: usize) -> Option<usize> {
        match &self.table {
            PolicyTable::Deterministic(acts) => Some(acts[h * self.shape.num_states + x] as usize),
            PolicyTable::Stochastic(p) => {
                let start = self.shape.index(h, x, 0);
                p[start..start + self.shape.num_actions].iter().position(|&q| q == 1.0)
            }
        }
    }

    /// `(a, pi_h(a | x))` for every action with positive probability.
    pub fn support(&self, h: usize, x: usize) -> Support<'_> {
        match &self.table {
            PolicyTable::Stochastic(p) => {
                let start = self.shape.index(h, x, 0);
                Support::Row(p[start..start + self.shape.num_actions].iter().enumerate())
            }
            PolicyTable::Deterministic(acts) => Support::One(Some(acts[h * self.shape.num_states + x] as usize)),
        }
    }

    /// Dense table indexed by [`Shape::index`].
    pub fn probs(&self) -> Vec<f64> {
        match &self.table {
            PolicyTable::Stochastic(p) => p.clone(),
            PolicyTable::Deterministic(acts) => {
                let na = self.shape.num_actions;
                let mut probs = vec![0.0; self.shape.cells()];
                for (hx, &a) in acts.iter().enumerate() {
                    probs[hx * na + a as usize] = 1.0;
                }
                probs
            }
        }
    }

    /// Consumes one uniform draw either way, so the two representations of
    /// the same policy give identical streams.
    pub fn sample_action<R: Rng + ?Sized>(&self, h: usize, x: usize, rng: &mut R) -> usize {
        match &self.table {
            PolicyTable::Stochastic(p) => {
                let start = self.shape.index(h, x, 0);
                sample_categorical(&p[start..start + self.shape.num_actions], rng)
            }
            PolicyTable::Deterministic(acts) => {
                let _: f64 = rng.random();
                acts[h * self.shape.num_states + x] as usize
            }
        }
    }
}

impl PartialEq for MarkovPolicy {
    fn eq(&self, other: &Self) -> bool {
        if self.shape != other.shape {
            return false;
        }
        match (&self.table, &other.table) {
            (PolicyTable::Deterministic(a), PolicyTable::Deterministic(b)) => a == b,
            _ => self.probs() == other.probs(),
        }
    }
}

impl Serialize for MarkovPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("MarkovPolicy", 2)?;
        st.serialize_field("shape", &self.shape)?;
        st.serialize_field("probs", &self.probs())?;
        st.end()
    }
}

/// Iterator returned by [`MarkovPolicy::support`].
pub enum Support<'a> {
    Row(std::iter::Enumerate<std::slice::Iter<'a, f64>>),
    One(Option<usize>),
}

impl Iterator for Support<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            Support::Row(it) => it.find(|(_, &p)| p != 0.0).map(|(a, &p)| (a, p)),
            Support::One(a) => a.take().map(|a| (a, 1.0)),
        }
    }
}

/// One `(state, action, reward)` record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: u32,
    pub action: u32,
    pub reward: f64,
}

impl Step {
    pub fn new(state: usize, action: usize, reward: f64) -> Self {
        Self { state: state as u32, action: action as u32, reward }
    }
}

/// An ordered list of `H` steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Checks length, index ranges and that rewards lie in `[0, 1]`.
    pub fn validate(&self, shape: Shape) -> Result<()> {
        dim_check("trajectory length", shape.horizon, self.steps.len())?;
        for (h, step) in self.steps.iter().enumerate() {
            if step.state as usize >= shape.num_states || step.action as usize >= shape.num_actions {
                return Err(Error::Dimension(format!(
                    "step {h}: (state {}, action {}) outside shape",
                    step.state, step.action
                )));
            }
            if !(0.0..=1.0).contains(&step.reward) {
                return Err(Error::Range(format!("step {h}: reward {} outside [0, 1]", step.reward)));
            }
        }
        Ok(())
    }
}

/// Where a trajectory came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Offline,
    /// Online episode index, starting at 1.
    Online(usize),
}

/// Offline trajectories followed by online ones in episode order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    origins: Vec<Origin>,
    n_offline: usize,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn offline(trajectories: Vec<Trajectory>) -> Self {
        let n = trajectories.len();
        Self { origins: vec![Origin::Offline; n], trajectories, n_offline: n }
    }

    pub fn push_offline(&mut self, trajectory: Trajectory) -> Result<()> {
        if self.n_offline != self.trajectories.len() {
            return Err(Error::Dataset("offline trajectories must precede online ones".into()));
        }
        self.trajectories.push(trajectory);
        self.origins.push(Origin::Offline);
        self.n_offline += 1;
        Ok(())
    }

    pub fn push_online(&mut self, episode: usize, trajectory: Trajectory) -> Result<()> {
        if let Some(Origin::Online(prev)) = self.origins.last() {
            if episode <= *prev {
                return Err(Error::Dataset(format!(
                    "online episode {episode} does not follow {prev}"
                )));
            }
        }
        self.trajectories.push(trajectory);
        self.origins.push(Origin::Online(episode));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n_offline(&self) -> usize {
        self.n_offline
    }

    pub fn n_online(&self) -> usize {
        self.trajectories.len() - self.n_offline
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn iter(&self) -> impl Iterator<Item = (Origin, &Trajectory)> {
        self.origins.iter().copied().zip(self.trajectories.iter())
    }
}

/// How realized rewards are drawn from the mean reward `r_h(x, a)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModel {
    /// The realized reward equals the mean.
    #[default]
    Mean,
    /// Bernoulli with the mean as success probability.
    Bernoulli,
}

impl RewardModel {
    pub fn realize<R: Rng + ?Sized>(self, mean: f64, rng: &mut R) -> f64 {
        match self {
            RewardModel::Mean => mean,
            RewardModel::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dynamic programming

/// Result of greedy backward induction.
#[derive(Clone, Debug)]
pub(crate) struct GreedyPlan {
    /// One action per `(h, x)`.
    pub actions: Vec<usize>,
    /// `Q_h(x, a)` per cell, empty unless requested.
    pub q_values: Vec<f64>,
    /// `V_1(x)`.
    pub root: Vec<f64>,
}

/// Backward induction maximizing `stage(h, x, a) + E[V_{h+1}]`; ties go to
/// the lowest action. With `clip`, `Q_h` is clipped to `[0, H - h]`.
pub(crate) fn plan_greedy<D, F>(dynamics: &D, stage: F, clip: bool, keep_q: bool) -> GreedyPlan
where
    D: Dynamics + ?Sized,
    F: Fn(usize, usize, usize) -> f64,
{
    let s = dynamics.shape();
    let (nx, na) = (s.num_states, s.num_actions);
    let mut actions = vec![0; s.horizon * nx];
    let mut q_values = if keep_q { vec![0.0; s.cells()] } else { Vec::new() };
    let mut next_v = vec![0.0; nx];
    let mut cur_v = vec![0.0; nx];
    for h in (0..s.horizon).rev() {
        let last = h + 1 == s.horizon;
        let v_mean = next_v.iter().sum::<f64>() / nx as f64;
        let cap = s.remaining(h);
        for x in 0..nx {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                let future = if last { 0.0 } else { dynamics.expect(h, x, a, &next_v, v_mean) };
                let mut q = stage(h, x, a) + future;
                if clip {
                    q = q.clamp(0.0, cap);
                }
                if keep_q {
                    q_values[s.index(h, x, a)] = q;
                }
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            actions[h * nx + x] = best_a;
            cur_v[x] = best;
        }
        std::mem::swap(&mut cur_v, &mut next_v);
    }
    GreedyPlan { actions, q_values, root: next_v }
}

/// `V_1^pi(x)` with per-cell stage payoff `stage(h, x, a)`.
pub(crate) fn evaluate_policy<D, F>(dynamics: &D, policy: &MarkovPolicy, stage: F) -> Vec<f64>
where
    D: Dynamics + ?Sized,
    F: Fn(usize, usize, usize) -> f64,
{
    let s = dynamics.shape();
    let nx = s.num_states;
    let mut next_v = vec![0.0; nx];
    let mut cur_v = vec![0.0; nx];
    for h in (0..s.horizon).rev() {
        let last = h + 1 == s.horizon;
        let v_mean = next_v.iter().sum::<f64>() / nx as f64;
        for x in 0..nx {
            let mut v = 0.0;
            for (a, p) in policy.support(h, x) {
                let future = if last { 0.0 } else { dynamics.expect(h, x, a, &next_v, v_mean) };
                v += p * (stage(h, x, a) + future);
            }
            cur_v[x] = v;
        }
        std::mem::swap(&mut cur_v, &mut next_v);
    }
    next_v
}

/// Exact `V^pi` of `policy` under `mdp` by backward dynamic programming.
pub fn value_of_policy(mdp: &TabularMdp, policy: &MarkovPolicy) -> Result<f64> {
    mdp.check_policy(policy)?;
    let root = evaluate_policy(mdp, policy, |h, x, a| mdp.reward(h, x, a));
    Ok(mdp.initial_expect(&root))
}

/// Optimal deterministic policy with its Q-values.
#[derive(Clone, Debug)]
pub struct OptimalSolution {
    pub policy: MarkovPolicy,
    /// `Q*_h(x, a)` indexed by [`Shape::index`].
    pub q_values: Vec<f64>,
    pub value: f64,
}

impl OptimalSolution {
    pub fn q(&self, shape: Shape, h: usize, x: usize, a: usize) -> f64 {
        self.q_values[shape.index(h, x, a)]
    }
}

/// Greedy optimal policy (ties to the lowest action index) and `Q*`.
pub fn optimal_policy(mdp: &TabularMdp) -> OptimalSolution {
    let plan = plan_greedy(mdp, |h, x, a| mdp.reward(h, x, a), false, true);
    let policy = MarkovPolicy::deterministic(mdp.shape, &plan.actions)
        .expect("greedy actions are in range");
    let value = mdp.initial_expect(&plan.root);
    OptimalSolution { policy, q_values: plan.q_values, value }
}

/// `max_pi V^pi - V^policy`, clamped at zero against rounding.
pub fn suboptimality_gap(mdp: &TabularMdp, policy: &MarkovPolicy) -> Result<f64> {
    let v = value_of_policy(mdp, policy)?;
    Ok((optimal_policy(mdp).value - v).max(0.0))
}

/// State-action occupancy `d_h^pi(x, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMeasure {
    shape: Shape,
    mass: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn get(&self, h: usize, x: usize, a: usize) -> f64 {
        self.mass[self.shape.index(h, x, a)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    pub fn step_mass(&self, h: usize) -> f64 {
        let per_step = self.shape.num_states * self.shape.num_actions;
        self.mass[h * per_step..(h + 1) * per_step].iter().sum()
    }
}

/// Forward recursion `d_1 = q . pi_1`, `d_{h+1}(x') = sum d_h(x, a) P_h(x'|x, a) pi_{h+1}(.|x')`.
pub fn occupancy(mdp: &TabularMdp, policy: &MarkovPolicy) -> Result<OccupancyMeasure> {
    mdp.check_policy(policy)?;
    let s = mdp.shape;
    let nx = s.num_states;
    let mut mass = vec![0.0; s.cells()];
    let mut state_dist = mdp.init_dist.clone();
    for h in 0..s.horizon {
        let mut next_dist = vec![0.0; nx];
        let mut uniform_mass = 0.0;
        for x in 0..nx {
            if state_dist[x] == 0.0 {
                continue;
            }
            for (a, p) in policy.support(h, x) {
                let d = state_dist[x] * p;
                mass[s.index(h, x, a)] = d;
                if d == 0.0 || h + 1 == s.horizon {
                    continue;
                }
                match mdp.next_states(h, x, a) {
                    NextStates::Sparse { states, probs } => {
                        for (&y, &q) in states.iter().zip(probs) {
                            next_dist[y] += d * q;
                        }
                    }
                    NextStates::Uniform(_) => uniform_mass += d,
                }
            }
        }
        if uniform_mass > 0.0 {
            let share = uniform_mass / nx as f64;
            next_dist.iter_mut().for_each(|v| *v += share);
        }
        state_dist = next_dist;
    }
    Ok(OccupancyMeasure { shape: s, mass })
}

/// Samples one `H`-step trajectory.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &MarkovPolicy,
    rewards: RewardModel,
    rng: &mut R,
) -> Trajectory {
    let s = mdp.shape;
    let mut steps = Vec::with_capacity(s.horizon);
    let mut x = mdp.sample_initial(rng);
    for h in 0..s.horizon {
        let a = policy.sample_action(h, x, rng);
        let r = rewards.realize(mdp.reward(h, x, a), rng);
        steps.push(Step::new(x, a, r));
        if h + 1 < s.horizon {
            x = mdp.sample_next(h, x, a, rng);
        }
    }
    Trajectory::new(steps)
}

/// [`sample_trajectory`] with a fresh generator seeded from `seed`.
pub fn sample_trajectory_seeded(
    mdp: &TabularMdp,
    policy: &MarkovPolicy,
    rewards: RewardModel,
    seed: u64,
) -> Result<Trajectory> {
    mdp.check_policy(policy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_trajectory(mdp, policy, rewards, &mut rng))
}

/// Coverage of a target policy by a behavior policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TabularConcentrability {
    /// `max d^target / d^behavior` over cells the behavior visits; infinite
    /// when the target puts mass where the behavior has none.
    pub ratio_bound: f64,
    /// Squared ratio of expected per-cell uncertainties under the offline counts.
    pub uncertainty_ratio: f64,
}

/// Per-cell uncertainty in units of the bonus scale: `min(H - h, beta/sqrt(N)) / beta`,
/// with unvisited cells at the cap `(H - h) / beta`.
pub(crate) fn unit_uncertainty(shape: Shape, h: usize, count: u64, beta: f64) -> f64 {
    let cap = shape.remaining(h);
    if count == 0 {
        cap / beta
    } else {
        (beta / (count as f64).sqrt()).min(cap) / beta
    }
}

/// Concentrability proxies of `target` relative to `behavior`.
///
/// `offline_counts` holds `N_h(x, a)` of the offline dataset; `beta` is the
/// oracle bonus scale, needed only to place the cap for unvisited cells.
pub fn concentrability_tabular(
    target: &MarkovPolicy,
    behavior: &MarkovPolicy,
    mdp: &TabularMdp,
    offline_counts: &[u64],
    beta: f64,
) -> Result<TabularConcentrability> {
    let s = mdp.shape;
    dim_check("offline counts", s.cells(), offline_counts.len())?;
    if offline_counts.iter().all(|&n| n == 0) {
        return Err(Error::Dataset("offline counts are empty".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Range(format!("bonus scale must be positive, got {beta}")));
    }
    let d_target = occupancy(mdp, target)?;
    let d_behavior = occupancy(mdp, behavior)?;

    let mut ratio_bound: f64 = 0.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for h in 0..s.horizon {
        for x in 0..s.num_states {
            for a in 0..s.num_actions {
                let i = s.index(h, x, a);
                let (dt, db) = (d_target.mass[i], d_behavior.mass[i]);
                if db > 0.0 {
                    ratio_bound = ratio_bound.max(dt / db);
                } else if dt > 0.0 {
                    ratio_bound = f64::INFINITY;
                }
                let u = unit_uncertainty(s, h, offline_counts[i], beta);
                num += dt * u;
                den += db * u;
            }
        }
    }
    let uncertainty_ratio = if num == den { 1.0 } else { (num / den).powi(2) };
    Ok(TabularConcentrability { ratio_bound, uncertainty_ratio })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Random dense MDP for tests.
    pub(crate) fn random_mdp(shape: Shape, seed: u64) -> TabularMdp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nx = shape.num_states;
        let mut transitions = Vec::with_capacity(shape.cells() * nx);
        for _ in 0..shape.cells() {
            let raw: Vec<f64> = (0..nx).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            transitions.extend(raw.iter().map(|v| v / total));
        }
        let rewards = (0..shape.cells()).map(|_| rng.random::<f64>()).collect();
        let raw: Vec<f64> = (0..nx).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let init = raw.iter().map(|v| v / total).collect();
        TabularMdp::from_dense(shape, &transitions, rewards, init).unwrap()
    }

    pub(crate) fn random_policy(shape: Shape, seed: u64) -> MarkovPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probs = Vec::with_capacity(shape.cells());
        for _ in 0..shape.horizon * shape.num_states {
            let raw: Vec<f64> = (0..shape.num_actions).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            probs.extend(raw.iter().map(|v| v / total));
        }
        MarkovPolicy::new(shape, probs).unwrap()
    }

    /// Oracle: sums probability x return over every `(x_1, a_1, ..., x_H, a_H)` path.
    pub(crate) fn enumerate_value(mdp: &TabularMdp, policy: &MarkovPolicy) -> f64 {
        fn go(mdp: &TabularMdp, pi: &MarkovPolicy, h: usize, x: usize, p: f64, ret: f64) -> f64 {
            let s = mdp.shape();
            let mut total = 0.0;
            for a in 0..s.num_actions {
                let pa = p * pi.prob(h, x, a);
                if pa == 0.0 {
                    continue;
                }
                let r = ret + mdp.reward(h, x, a);
                if h + 1 == s.horizon {
                    total += pa * r;
                } else {
                    for y in 0..s.num_states {
                        let py = pa * mdp.transition_prob(h, x, a, y);
                        if py > 0.0 {
                            total += go(mdp, pi, h + 1, y, py, r);
                        }
                    }
                }
            }
            total
        }
        (0..mdp.num_states())
            .map(|x| go(mdp, policy, 0, x, mdp.init_dist()[x], 0.0))
            .sum()
    }

    fn chain(shape: Shape, reward: f64) -> TabularMdp {
        // Deterministic x -> (x + 1) mod |X| for every action.
        let rows = (0..shape.cells())
            .map(|i| {
                let x = (i / shape.num_actions) % shape.num_states;
                TransitionRow::Sparse(vec![((x + 1) % shape.num_states, 1.0)])
            })
            .collect();
        let mut init = vec![0.0; shape.num_states];
        init[0] = 1.0;
        TabularMdp::from_rows(shape, false, rows, vec![reward; shape.cells()], init).unwrap()
    }

    fn bandit_mdp(rewards: [f64; 2]) -> TabularMdp {
        let shape = Shape::new(1, 2, 1).unwrap();
        TabularMdp::from_dense(shape, &[1.0, 1.0], rewards.to_vec(), vec![1.0]).unwrap()
    }

    #[test]
    fn zero_and_maximal_reward_values() {
        let shape = Shape::new(3, 2, 4).unwrap();
        let pi = random_policy(shape, 1);
        assert_eq!(value_of_policy(&chain(shape, 0.0), &pi).unwrap(), 0.0);
        let v = value_of_policy(&chain(shape, 1.0), &pi).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn value_matches_enumeration_2x2() {
        let shape = Shape::new(2, 2, 2).unwrap();
        for seed in 0..20 {
            let mdp = random_mdp(shape, seed);
            let pi = random_policy(shape, seed + 100);
            let dp = value_of_policy(&mdp, &pi).unwrap();
            assert!((dp - enumerate_value(&mdp, &pi)).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mdp = random_mdp(Shape::new(2, 2, 2).unwrap(), 0);
        let pi = MarkovPolicy::uniform(Shape::new(3, 2, 2).unwrap());
        assert!(matches!(value_of_policy(&mdp, &pi), Err(Error::Dimension(_))));
    }

    #[test]
    fn optimal_picks_dominant_action() {
        let shape = Shape::new(2, 2, 3).unwrap();
        let mut rewards = vec![0.0; shape.cells()];
        for h in 0..3 {
            for x in 0..2 {
                rewards[shape.index(h, x, 0)] = 1.0;
            }
        }
        let transitions = vec![0.5; shape.cells() * 2];
        let mdp = TabularMdp::from_dense(shape, &transitions, rewards, vec![0.5, 0.5]).unwrap();
        let sol = optimal_policy(&mdp);
        for h in 0..3 {
            for x in 0..2 {
                assert_eq!(sol.policy.prob(h, x, 0), 1.0);
            }
        }
        assert!((sol.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_step_argmax_and_gap() {
        let mdp = bandit_mdp([0.2, 0.9]);
        let sol = optimal_policy(&mdp);
        assert_eq!(sol.policy.prob(0, 0, 1), 1.0);
        assert!((sol.value - 0.9).abs() < 1e-12);
        let always_zero = MarkovPolicy::deterministic(mdp.shape(), &[0]).unwrap();
        assert!((suboptimality_gap(&mdp, &always_zero).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(suboptimality_gap(&mdp, &sol.policy).unwrap(), 0.0);
    }

    #[test]
    fn ties_break_to_lowest_action() {
        let mdp = bandit_mdp([0.5, 0.5]);
        assert_eq!(optimal_policy(&mdp).policy.prob(0, 0, 0), 1.0);
    }

    #[test]
    fn optimal_dominates_random_policies() {
        let shape = Shape::new(3, 3, 3).unwrap();
        let mdp = random_mdp(shape, 7);
        let v_star = optimal_policy(&mdp).value;
        for seed in 0..100 {
            let v = value_of_policy(&mdp, &random_policy(shape, seed)).unwrap();
            assert!(v <= v_star + 1e-12);
        }
    }

    #[test]
    fn optimal_q_satisfies_bellman() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let mdp = random_mdp(shape, 3);
        let sol = optimal_policy(&mdp);
        for h in 0..3 {
            for x in 0..3 {
                for a in 0..2 {
                    let mut target = mdp.reward(h, x, a);
                    if h + 1 < 3 {
                        for y in 0..3 {
                            let v_next = (0..2)
                                .map(|b| sol.q(shape, h + 1, y, b))
                                .fold(f64::NEG_INFINITY, f64::max);
                            target += mdp.transition_prob(h, x, a, y) * v_next;
                        }
                    }
                    assert!((sol.q(shape, h, x, a) - target).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn occupancy_point_mass_on_deterministic_path() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let mdp = chain(shape, 0.5);
        let pi = MarkovPolicy::deterministic(shape, &[1; 9]).unwrap();
        let d = occupancy(&mdp, &pi).unwrap();
        for h in 0..3 {
            assert_eq!(d.get(h, h % 3, 1), 1.0);
            assert!((d.step_mass(h) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn occupancy_uniform_on_symmetric_mdp() {
        let shape = Shape::new(4, 3, 3).unwrap();
        let rows = vec![TransitionRow::Uniform; shape.cells()];
        let mdp =
            TabularMdp::from_rows(shape, false, rows, vec![0.3; shape.cells()], vec![0.25; 4]).unwrap();
        let d = occupancy(&mdp, &MarkovPolicy::uniform(shape)).unwrap();
        for &m in d.as_slice() {
            assert!((m - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn occupancy_matches_monte_carlo() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let mdp = random_mdp(shape, 11);
        let pi = random_policy(shape, 12);
        let d = occupancy(&mdp, &pi).unwrap();
        let n = 100_000;
        let mut counts = vec![0u64; shape.cells()];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..n {
            let traj = sample_trajectory(&mdp, &pi, RewardModel::Mean, &mut rng);
            for (h, step) in traj.steps.iter().enumerate() {
                counts[shape.index(h, step.state as usize, step.action as usize)] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = d.as_slice()[i];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() <= 3.0 * se + 1e-12, "cell {i}");
        }
    }

    #[test]
    fn occupancy_reproduces_value() {
        let shape = Shape::new(3, 3, 3).unwrap();
        let mdp = random_mdp(shape, 21);
        let sol = optimal_policy(&mdp);
        let d = occupancy(&mdp, &sol.policy).unwrap();
        let v: f64 = d.as_slice().iter().zip(mdp.reward_table()).map(|(d, r)| d * r).sum();
        assert!((v - sol.value).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let shape = Shape::new(3, 2, 4).unwrap();
        let mdp = random_mdp(shape, 2);
        let pi = random_policy(shape, 3);
        let a = sample_trajectory_seeded(&mdp, &pi, RewardModel::Bernoulli, 9).unwrap();
        let b = sample_trajectory_seeded(&mdp, &pi, RewardModel::Bernoulli, 9).unwrap();
        assert_eq!(a, b);
        let det = chain(shape, 1.0);
        let pi_det = MarkovPolicy::deterministic(shape, &[0; 12]).unwrap();
        let t1 = sample_trajectory_seeded(&det, &pi_det, RewardModel::Mean, 1).unwrap();
        let t2 = sample_trajectory_seeded(&det, &pi_det, RewardModel::Mean, 2).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn first_step_reward_mean_matches_mixture() {
        let shape = Shape::new(3, 2, 2).unwrap();
        let mdp = random_mdp(shape, 31);
        let pi = random_policy(shape, 32);
        let expected: f64 = (0..3)
            .flat_map(|x| (0..2).map(move |a| (x, a)))
            .map(|(x, a)| mdp.init_dist()[x] * pi.prob(0, x, a) * mdp.reward(0, x, a))
            .sum();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_trajectory(&mdp, &pi, RewardModel::Bernoulli, &mut rng).steps[0].reward;
        }
        let mean = sum / n as f64;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((mean - expected).abs() <= 3.0 * se);
    }

    #[test]
    fn concentrability_self_ratio_is_one() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let mdp = random_mdp(shape, 41);
        let pi = random_policy(shape, 42);
        let counts: Vec<u64> = (0..shape.cells() as u64).map(|i| i % 5).collect();
        let c = concentrability_tabular(&pi, &pi, &mdp, &counts, 1.3).unwrap();
        assert_eq!(c.uncertainty_ratio, 1.0);
        assert!((c.ratio_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concentrability_uncovered_target_is_infinite() {
        let mdp = bandit_mdp([0.2, 0.9]);
        let shape = mdp.shape();
        let target = MarkovPolicy::deterministic(shape, &[1]).unwrap();
        let behavior = MarkovPolicy::deterministic(shape, &[0]).unwrap();
        let c = concentrability_tabular(&target, &behavior, &mdp, &[10, 0], 1.0).unwrap();
        assert!(c.ratio_bound.is_infinite());
        assert!(concentrability_tabular(&target, &behavior, &mdp, &[0, 0], 1.0).is_err());
    }

    #[test]
    fn rejects_bad_rows() {
        let shape = Shape::new(2, 1, 1).unwrap();
        let bad = vec![TransitionRow::Sparse(vec![(0, 0.7)]), TransitionRow::Uniform];
        assert!(TabularMdp::from_rows(shape, false, bad, vec![0.0; 2], vec![0.5, 0.5]).is_err());
        let neg = vec![TransitionRow::Sparse(vec![(0, 1.5), (1, -0.5)]), TransitionRow::Uniform];
        assert!(TabularMdp::from_rows(shape, false, neg, vec![0.0; 2], vec![0.5, 0.5]).is_err());
        let ok = vec![TransitionRow::Sparse(vec![(1, 1.0)]), TransitionRow::Uniform];
        assert!(TabularMdp::from_rows(shape, false, ok.clone(), vec![1.5, 0.0], vec![0.5, 0.5]).is_err());
        assert!(TabularMdp::from_rows(shape, false, ok, vec![1.0, 0.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn json_round_trip_preserves_mdp() {
        let mdp = random_mdp(Shape::new(2, 2, 2).unwrap(), 4);
        let json = serde_json::to_string(&mdp).unwrap();
        let back: TabularMdp = serde_json::from_str(&json).unwrap();
        assert_eq!(back, mdp);
        assert!(serde_json::from_str::<TabularMdp>(r#"{"num_states":1,"num_actions":1,"horizon":1,"transitions":["nope"],"rewards":[0.0],"init_dist":[1.0]}"#).is_err());
    }

    #[test]
    fn dataset_discipline() {
        let mut data = Dataset::new();
        data.push_offline(Trajectory::default()).unwrap();
        data.push_online(1, Trajectory::default()).unwrap();
        assert!(data.push_offline(Trajectory::default()).is_err());
        assert!(data.push_online(1, Trajectory::default()).is_err());
        data.push_online(2, Trajectory::default()).unwrap();
        assert_eq!((data.n_offline(), data.n_online()), (1, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn value_bounds_and_enumeration(nx in 1usize..=3, na in 1usize..=3, h in 1usize..=3, seed in 0u64..1000) {
            let shape = Shape::new(nx, na, h).unwrap();
            let mdp = random_mdp(shape, seed);
            let pi = random_policy(shape, seed ^ 0xabc);
            let v = value_of_policy(&mdp, &pi).unwrap();
            prop_assert!(v >= 0.0 && v <= h as f64 + 1e-12);
            prop_assert!((v - enumerate_value(&mdp, &pi)).abs() < 1e-9);
            prop_assert!(suboptimality_gap(&mdp, &pi).unwrap() >= 0.0);
            let d = occupancy(&mdp, &pi).unwrap();
            for step in 0..h {
                prop_assert!((d.step_mass(step) - 1.0).abs() < 1e-9);
            }
        }
    }
}
