//! Linear contextual bandits: the model, ridge regression with confidence
//! widths, and LinUCB-style optimistic/pessimistic selection.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::mdp::{check_distribution, sample_categorical};

const NORM_TOL: f64 = 1e-9;

/// Reward noise added to `phi(x, a) . theta*`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Uniform { half_width: f64 },
    Gaussian { std: f64 },
    /// Gaussian conditioned on `|xi| <= bound`, drawn by rejection.
    TruncatedGaussian { std: f64, bound: f64 },
}

impl NoiseModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::None => true,
            NoiseModel::Uniform { half_width } => half_width.is_finite() && half_width >= 0.0,
            NoiseModel::Gaussian { std } => std.is_finite() && std >= 0.0,
            NoiseModel::TruncatedGaussian { std, bound } => {
                std.is_finite() && std >= 0.0 && bound.is_finite() && bound > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise model {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Uniform { half_width } => {
                if half_width == 0.0 {
                    0.0
                } else {
                    rng.random_range(-half_width..=half_width)
                }
            }
            NoiseModel::Gaussian { std } => {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            }
            NoiseModel::TruncatedGaussian { std, bound } => {
                if std == 0.0 {
                    return 0.0;
                }
                loop {
                    let z: f64 = StandardNormal.sample(rng);
                    let xi = std * z;
                    if xi.abs() <= bound {
                        return xi;
                    }
                }
            }
        }
    }
}

/// A linear contextual bandit with a finite context set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BanditRepr", into = "BanditRepr")]
pub struct LinearBanditModel {
    dim: usize,
    num_contexts: usize,
    num_arms: usize,
    features: Vec<f64>,
    theta_star: Vec<f64>,
    context_dist: Vec<f64>,
    noise: NoiseModel,
    means: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BanditRepr {
    dim: usize,
    num_contexts: usize,
    num_arms: usize,
    features: Vec<f64>,
    theta_star: Vec<f64>,
    context_dist: Vec<f64>,
    noise: NoiseModel,
}

impl TryFrom<BanditRepr> for LinearBanditModel {
    type Error = Error;

    fn try_from(r: BanditRepr) -> Result<Self> {
        LinearBanditModel::new(r.dim, r.num_contexts, r.num_arms, r.features, r.theta_star, r.context_dist, r.noise)
    }
}

impl From<LinearBanditModel> for BanditRepr {
    fn from(m: LinearBanditModel) -> Self {
        BanditRepr {
            dim: m.dim,
            num_contexts: m.num_contexts,
            num_arms: m.num_arms,
            features: m.features,
            theta_star: m.theta_star,
            context_dist: m.context_dist,
            noise: m.noise,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearBanditModel {
    /// `features` is laid out as `[context][arm][coordinate]`.
    pub fn new(
        dim: usize,
        num_contexts: usize,
        num_arms: usize,
        features: Vec<f64>,
        theta_star: Vec<f64>,
        context_dist: Vec<f64>,
        noise: NoiseModel,
    ) -> Result<Self> {
        if dim == 0 || num_contexts == 0 || num_arms == 0 {
            return Err(Error::Config("bandit dimensions must be positive".into()));
        }
        let pairs = num_contexts
            .checked_mul(num_arms)
            .and_then(|p| p.checked_mul(dim))
            .ok_or_else(|| Error::Dimension("bandit shape overflows".into()))?;
        dim_check("features", pairs, features.len())?;
        dim_check("theta_star", dim, theta_star.len())?;
        dim_check("context distribution", num_contexts, context_dist.len())?;
        check_distribution("context distribution", &context_dist)?;
        noise.validate()?;
        if theta_star.iter().any(|v| !v.is_finite()) || dot(&theta_star, &theta_star).sqrt() > 1.0 + NORM_TOL {
            return Err(Error::Range("theta_star must have norm at most 1".into()));
        }
        for (i, phi) in features.chunks(dim).enumerate() {
            if phi.iter().any(|v| !v.is_finite()) || dot(phi, phi).sqrt() > 1.0 + NORM_TOL {
                return Err(Error::Range(format!(
                    "feature of (context {}, arm {}) lies outside the unit ball",
                    i / num_arms,
                    i % num_arms
                )));
            }
        }
        let means = features.chunks(dim).map(|phi| dot(phi, &theta_star)).collect();
        Ok(Self { dim, num_contexts, num_arms, features, theta_star, context_dist, noise, means })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn context_dist(&self) -> &[f64] {
        &self.context_dist
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn feature(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.num_arms + a) * self.dim;
        &self.features[start..start + self.dim]
    }

    /// All arm features of context `x`, arm-major.
    pub fn context_features(&self, x: usize) -> &[f64] {
        let len = self.num_arms * self.dim;
        &self.features[x * len..(x + 1) * len]
    }

    pub fn mean_reward(&self, x: usize, a: usize) -> f64 {
        self.means[x * self.num_arms + a]
    }

    /// Mean rewards `r(x, a)`, context-major.
    pub fn mean_rewards(&self) -> &[f64] {
        &self.means
    }

    pub fn best_arm(&self, x: usize) -> usize {
        argmax(&self.means[x * self.num_arms..(x + 1) * self.num_arms])
    }

    pub fn optimal_arms(&self) -> Vec<usize> {
        (0..self.num_contexts).map(|x| self.best_arm(x)).collect()
    }

    pub fn optimal_value(&self) -> f64 {
        (0..self.num_contexts)
            .map(|x| self.context_dist[x] * self.mean_reward(x, self.best_arm(x)))
            .sum()
    }

    /// Expected reward of a deterministic arm map.
    pub fn value_of_arms(&self, arms: &[usize]) -> Result<f64> {
        dim_check("arm map", self.num_contexts, arms.len())?;
        let mut v = 0.0;
        for (x, &a) in arms.iter().enumerate() {
            if a >= self.num_arms {
                return Err(Error::Dimension(format!("arm {a} out of range")));
            }
            v += self.context_dist[x] * self.mean_reward(x, a);
        }
        Ok(v)
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.context_dist, rng)
    }

    pub fn realize_reward<R: Rng + ?Sized>(&self, x: usize, a: usize, rng: &mut R) -> f64 {
        self.mean_reward(x, a) + self.noise.sample(rng)
    }
}

/// Index of the first maximal entry.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Width multiplier `beta(n) = c (sqrt(lambda) + sqrt(2 ln(1/delta) + d ln(1 + n/(lambda d))))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSpec {
    pub beta_scale: f64,
    pub delta: f64,
}

impl Default for ConfidenceSpec {
    fn default() -> Self {
        Self { beta_scale: 1.0, delta: 0.05 }
    }
}

impl ConfidenceSpec {
    pub fn new(beta_scale: f64, delta: f64) -> Result<Self> {
        if !(beta_scale > 0.0 && beta_scale.is_finite()) {
            return Err(Error::Config(format!("beta scale must be positive, got {beta_scale}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { beta_scale, delta })
    }

    pub fn beta(&self, dim: usize, lambda: f64, n: usize) -> f64 {
        let d = dim as f64;
        let log_term = 2.0 * (1.0 / self.delta).ln() + d * (1.0 + n as f64 / (lambda * d)).ln();
        self.beta_scale * (lambda.sqrt() + log_term.sqrt())
    }
}

/// Ridge regression state `Lambda = lambda I + sum phi phi^T`, `b = sum r phi`.
#[derive(Clone, Debug)]
pub struct RidgeState {
    lambda: f64,
    gram: DMatrix<f64>,
    response: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    gram_inv: DMatrix<f64>,
    theta_hat: DVector<f64>,
    count: usize,
}

impl RidgeState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("ridge dimension must be positive".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("ridge parameter must be positive, got {lambda}")));
        }
        let gram = DMatrix::identity(dim, dim) * lambda;
        let chol = Cholesky::new(gram.clone()).expect("scaled identity is positive definite");
        Ok(Self {
            lambda,
            gram_inv: DMatrix::identity(dim, dim) / lambda,
            gram,
            response: DVector::zeros(dim),
            chol,
            theta_hat: DVector::zeros(dim),
            count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.response.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    fn check_feature(&self, feature: &[f64]) -> Result<()> {
        dim_check("feature", self.dim(), feature.len())?;
        if feature.iter().any(|v| !v.is_finite()) || dot(feature, feature).sqrt() > 1.0 + NORM_TOL {
            return Err(Error::Range("feature lies outside the unit ball".into()));
        }
        Ok(())
    }

    fn accumulate(&mut self, feature: &[f64], reward: f64) {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                self.gram[(i, j)] += feature[i] * feature[j];
            }
            self.response[i] += reward * feature[i];
        }
        self.count += 1;
    }

    fn refresh(&mut self) -> Result<()> {
        self.chol = Cholesky::new(self.gram.clone())
            .ok_or_else(|| Error::Numerical("gram matrix lost positive definiteness".into()))?;
        self.solve();
        Ok(())
    }

    fn solve(&mut self) {
        self.theta_hat = self.chol.solve(&self.response);
        self.gram_inv = self.chol.inverse();
    }

    /// Adds one sample and re-solves by a fresh Cholesky factorization.
    pub fn absorb(&mut self, feature: &[f64], reward: f64) -> Result<()> {
        self.check_feature(feature)?;
        self.accumulate(feature, reward);
        self.refresh()
    }

    /// Adds many samples, factorizing once at the end. Produces the same state
    /// as absorbing them one at a time.
    pub fn absorb_batch<'a, I>(&mut self, samples: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        for (feature, reward) in samples {
            self.check_feature(feature)?;
            self.accumulate(feature, reward);
        }
        self.refresh()
    }

    /// Adds one sample through a rank-one update of the Cholesky factor.
    pub fn absorb_rank_one(&mut self, feature: &[f64], reward: f64) -> Result<()> {
        self.check_feature(feature)?;
        self.accumulate(feature, reward);
        self.chol.rank_one_update(&DVector::from_column_slice(feature), 1.0);
        self.solve();
        Ok(())
    }

    /// `phi^T theta_hat`.
    pub fn predict(&self, feature: &[f64]) -> f64 {
        dot(feature, self.theta_hat.as_slice())
    }

    /// `||phi||^2` in the `Lambda^{-1}` norm.
    pub fn inv_norm_sq(&self, feature: &[f64]) -> f64 {
        let d = self.dim();
        let inv = self.gram_inv.as_slice();
        let nonzero = feature.iter().filter(|v| **v != 0.0).count();
        let mut total = 0.0;
        if 4 * nonzero >= d {
            for (col, &fi) in inv.chunks_exact(d).zip(feature) {
                total += fi * dot(col, feature);
            }
        } else {
            // Block-sparse features: skip the zero coordinates on both sides.
            for (i, &fi) in feature.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                let col = &inv[i * d..(i + 1) * d];
                let row: f64 = col.iter().zip(feature).filter(|(_, f)| **f != 0.0).map(|(g, f)| g * f).sum();
                total += fi * row;
            }
        }
        total.max(0.0)
    }

    /// `beta(count) ||phi||_{Lambda^{-1}}`.
    pub fn confidence_width(&self, feature: &[f64], spec: &ConfidenceSpec) -> Result<f64> {
        dim_check("feature", self.dim(), feature.len())?;
        Ok(self.width_unchecked(feature, spec.beta(self.dim(), self.lambda, self.count)))
    }

    fn width_unchecked(&self, feature: &[f64], beta: f64) -> f64 {
        beta * self.inv_norm_sq(feature).sqrt()
    }

    pub fn beta(&self, spec: &ConfidenceSpec) -> f64 {
        spec.beta(self.dim(), self.lambda, self.count)
    }
}

/// Arm maximizing `phi^T theta_hat + width`; ties go to the lowest index.
/// `arm_features` holds one `d`-vector per arm, concatenated.
pub fn linucb_select(state: &RidgeState, arm_features: &[f64], spec: &ConfidenceSpec) -> Result<usize> {
    let d = state.dim();
    if arm_features.is_empty() || arm_features.len() % d != 0 {
        return Err(Error::Dimension(format!(
            "arm features of length {} do not split into {d}-vectors",
            arm_features.len()
        )));
    }
    let beta = state.beta(spec);
    let scores: Vec<f64> = arm_features
        .chunks(d)
        .map(|phi| state.predict(phi) + state.width_unchecked(phi, beta))
        .collect();
    Ok(argmax(&scores))
}

/// Per-context arm maximizing the lower confidence bound and the
/// context-averaged LCB of those arms.
pub fn pessimistic_policy_value(
    state: &RidgeState,
    model: &LinearBanditModel,
    spec: &ConfidenceSpec,
) -> Result<(Vec<usize>, f64)> {
    dim_check("model dimension", state.dim(), model.dim())?;
    let beta = state.beta(spec);
    let mut arms = Vec::with_capacity(model.num_contexts());
    let mut lcb = 0.0;
    let mut scores = vec![0.0; model.num_arms()];
    for x in 0..model.num_contexts() {
        for (a, s) in scores.iter_mut().enumerate() {
            let phi = model.feature(x, a);
            *s = state.predict(phi) - state.width_unchecked(phi, beta);
        }
        let a = argmax(&scores);
        lcb += model.context_dist()[x] * scores[a];
        arms.push(a);
    }
    Ok((arms, lcb))
}

/// `||E_{x, target} phi||^2 / ||E_{x, behavior} phi||^2` in the inverse
/// offline gram norm. `behavior` holds arm probabilities, context-major.
pub fn concentrability_linear(
    target: &[usize],
    behavior: &[f64],
    offline_gram: &DMatrix<f64>,
    model: &LinearBanditModel,
) -> Result<f64> {
    let (nx, na, d) = (model.num_contexts(), model.num_arms(), model.dim());
    dim_check("target arm map", nx, target.len())?;
    dim_check("behavior probabilities", nx * na, behavior.len())?;
    if offline_gram.nrows() != d || offline_gram.ncols() != d {
        return Err(Error::Dimension(format!("offline gram must be {d}x{d}")));
    }
    let chol = Cholesky::new(offline_gram.clone())
        .ok_or_else(|| Error::Numerical("offline gram is not positive definite".into()))?;
    let mut e_target = DVector::<f64>::zeros(d);
    let mut e_behavior = DVector::<f64>::zeros(d);
    for x in 0..nx {
        let q = model.context_dist()[x];
        let a = target[x];
        if a >= na {
            return Err(Error::Dimension(format!("arm {a} out of range")));
        }
        for (k, v) in model.feature(x, a).iter().enumerate() {
            e_target[k] += q * v;
        }
        let probs = &behavior[x * na..(x + 1) * na];
        check_distribution(&format!("behavior row {x}"), probs)?;
        for (b, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (k, v) in model.feature(x, b).iter().enumerate() {
                e_behavior[k] += q * p * v;
            }
        }
    }
    let norm_sq = |v: &DVector<f64>| v.dot(&chol.solve(v));
    let den = norm_sq(&e_behavior);
    if den <= 0.0 {
        return Ok(f64::INFINITY);
    }
    if e_target == e_behavior {
        return Ok(1.0);
    }
    Ok(norm_sq(&e_target) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_ball(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dot(&v, &v).sqrt();
        let r: f64 = rng.random();
        v.iter().map(|x| x / n * r).collect()
    }

    fn symmetric_model(nx: usize, na: usize, d: usize, seed: u64) -> LinearBanditModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = (0..nx * na).flat_map(|_| random_ball(d, &mut rng)).collect();
        let theta = random_ball(d, &mut rng);
        LinearBanditModel::new(d, nx, na, features, theta, vec![1.0 / nx as f64; nx], NoiseModel::None).unwrap()
    }

    #[test]
    fn fresh_state_is_scaled_identity() {
        let s = RidgeState::new(3, 3.0).unwrap();
        assert_eq!(s.gram(), &(DMatrix::identity(3, 3) * 3.0));
        assert!(s.theta_hat().iter().all(|&v| v == 0.0));
        let s1 = RidgeState::new(1, 1.0).unwrap();
        assert_eq!(s1.predict(&[0.7]), 0.0);
        assert!(RidgeState::new(2, 0.0).is_err());
    }

    #[test]
    fn fresh_width_closed_form() {
        let spec = ConfidenceSpec::default();
        let s = RidgeState::new(2, 2.0).unwrap();
        let beta = spec.beta(2, 2.0, 0);
        let w = s.confidence_width(&[1.0, 0.0], &spec).unwrap();
        assert!((w - beta / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.confidence_width(&[0.0, 0.0], &spec).unwrap(), 0.0);
    }

    #[test]
    fn single_absorb_hand_solution() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        s.absorb(&[1.0, 0.0], 1.0).unwrap();
        assert!((s.theta_hat()[0] - 0.5).abs() < 1e-12);
        assert!(s.theta_hat()[1].abs() < 1e-12);
    }

    #[test]
    fn repeated_point_removes_shrinkage() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        let pts: Vec<(&[f64], f64)> = (0..100_000).map(|_| (&[1.0, 0.0][..], 0.8)).collect();
        s.absorb_batch(pts).unwrap();
        assert!((s.theta_hat()[0] - 0.8).abs() < 1e-4);
    }

    #[test]
    fn batch_equals_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<(Vec<f64>, f64)> = (0..50).map(|_| (random_ball(4, &mut rng), rng.random())).collect();
        let mut seq = RidgeState::new(4, 4.0).unwrap();
        for (phi, r) in &data {
            seq.absorb(phi, *r).unwrap();
        }
        let mut batch = RidgeState::new(4, 4.0).unwrap();
        batch.absorb_batch(data.iter().map(|(p, r)| (p.as_slice(), *r))).unwrap();
        assert_eq!(seq.theta_hat(), batch.theta_hat());
    }

    #[test]
    fn ucb_tie_and_dominance() {
        let spec = ConfidenceSpec::default();
        let s = RidgeState::new(2, 2.0).unwrap();
        assert_eq!(linucb_select(&s, &[0.5, 0.5, 0.5, 0.5], &spec).unwrap(), 0);
        assert_eq!(linucb_select(&s, &[0.0, 0.0, 1.0, 0.0], &spec).unwrap(), 1);
    }

    #[test]
    fn unexplored_arm_wins_after_poor_pulls() {
        let spec = ConfidenceSpec::default();
        let mut s = RidgeState::new(2, 2.0).unwrap();
        for _ in 0..200 {
            s.absorb(&[1.0, 0.0], 0.0).unwrap();
        }
        let beta = spec.beta(2, 2.0, 200);
        let ucb0 = s.predict(&[1.0, 0.0]) + beta * (1.0f64 / 202.0).sqrt();
        let ucb1 = beta * (1.0f64 / 2.0).sqrt();
        assert!(ucb1 > ucb0);
        assert_eq!(linucb_select(&s, &[1.0, 0.0, 0.0, 1.0], &spec).unwrap(), 1);
    }

    #[test]
    fn pessimism_recovers_optimum_on_noiseless_data() {
        let model = symmetric_model(5, 6, 3, 9);
        let spec = ConfidenceSpec::default();
        let mut s = RidgeState::new(3, 3.0).unwrap();
        let mut samples = Vec::new();
        for _ in 0..2000 {
            for x in 0..5 {
                for a in 0..6 {
                    samples.push((model.feature(x, a), model.mean_reward(x, a)));
                }
            }
        }
        s.absorb_batch(samples).unwrap();
        let (arms, lcb) = pessimistic_policy_value(&s, &model, &spec).unwrap();
        assert_eq!(arms, model.optimal_arms());
        assert!(lcb <= model.optimal_value());
    }

    #[test]
    fn pessimism_ties_on_fresh_state() {
        let features = vec![0.3; 2 * 3 * 2];
        let model = LinearBanditModel::new(2, 2, 3, features, vec![0.5, 0.5], vec![0.5, 0.5], NoiseModel::None).unwrap();
        let s = RidgeState::new(2, 2.0).unwrap();
        let (arms, _) = pessimistic_policy_value(&s, &model, &ConfidenceSpec::default()).unwrap();
        assert_eq!(arms, vec![0, 0]);
    }

    #[test]
    fn linear_concentrability_basics() {
        let model = symmetric_model(4, 3, 2, 1);
        let mut s = RidgeState::new(2, 2.0).unwrap();
        s.absorb(model.feature(0, 0), 0.0).unwrap();
        let target = vec![1, 0, 2, 1];
        let mut behavior = vec![0.0; 12];
        for (x, &a) in target.iter().enumerate() {
            behavior[x * 3 + a] = 1.0;
        }
        assert_eq!(concentrability_linear(&target, &behavior, s.gram(), &model).unwrap(), 1.0);
        let zero = LinearBanditModel::new(2, 1, 2, vec![0.0; 4], vec![0.1, 0.0], vec![1.0], NoiseModel::None).unwrap();
        assert!(concentrability_linear(&[0], &[0.5, 0.5], s.gram(), &zero).unwrap().is_infinite());
    }

    #[test]
    fn model_rejects_bad_inputs() {
        assert!(LinearBanditModel::new(1, 1, 1, vec![1.5], vec![0.5], vec![1.0], NoiseModel::None).is_err());
        assert!(LinearBanditModel::new(1, 1, 1, vec![1.0], vec![1.5], vec![1.0], NoiseModel::None).is_err());
        assert!(LinearBanditModel::new(1, 1, 1, vec![1.0], vec![0.5], vec![0.9], NoiseModel::None).is_err());
        let json = r#"{"dim":1,"num_contexts":1,"num_arms":1,"features":[2.0],"theta_star":[0.1],"context_dist":[1.0],"noise":{"kind":"none"}}"#;
        assert!(serde_json::from_str::<LinearBanditModel>(json).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let model = symmetric_model(2, 3, 2, 4);
        let json = serde_json::to_string(&model).unwrap();
        assert_eq!(serde_json::from_str::<LinearBanditModel>(&json).unwrap(), model);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ridge_invariants(seed in 0u64..10_000, n in 1usize..40, d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lambda = d as f64;
            let mut s = RidgeState::new(d, lambda).unwrap();
            let probe = random_ball(d, &mut rng);
            let mut prev = s.inv_norm_sq(&probe);
            for _ in 0..n {
                let phi = random_ball(d, &mut rng);
                s.absorb(&phi, rng.random_range(-2.0..2.0)).unwrap();
                let g = s.gram();
                prop_assert!((g - g.transpose()).amax() <= 1e-9);
                let min_eig = g.clone().symmetric_eigenvalues().min();
                prop_assert!(min_eig >= lambda - 1e-9);
                prop_assert!((g * s.theta_hat() - s.response()).amax() <= 1e-7);
                let cur = s.inv_norm_sq(&probe);
                prop_assert!(cur <= prev + 1e-12);
                prev = cur;
            }
        }

        #[test]
        fn beta_is_monotone(c in 0.01f64..10.0, delta in 0.001f64..0.999, d in 1usize..40, n in 0usize..100_000) {
            let spec = ConfidenceSpec::new(c, delta).unwrap();
            let b0 = spec.beta(d, d as f64, n);
            prop_assert!(b0 > 0.0);
            prop_assert!(spec.beta(d, d as f64, n + 1) >= b0);
        }

        #[test]
        fn strictly_shrinks_along_absorbed_direction(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = RidgeState::new(3, 3.0).unwrap();
            let phi = random_ball(3, &mut rng);
            prop_assume!(dot(&phi, &phi) > 1e-6);
            let before = s.inv_norm_sq(&phi);
            s.absorb(&phi, 0.0).unwrap();
            prop_assert!(s.inv_norm_sq(&phi) < before);
        }
    }
}
