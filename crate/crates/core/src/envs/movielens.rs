//! Ratings ingestion (`user<TAB>item<TAB>rating<TAB>timestamp` lines),
//! matrix completion and a linear bandit built from the factors.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nmf::{nmf, Factorization, NmfConfig};
use crate::bandit::{LinearBanditModel, NoiseModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
}

/// Parses ratings; blank lines are skipped, anything else malformed is an
/// error naming its 1-based line.
pub fn parse_ratings(text: &str) -> Result<Vec<Rating>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse { line: line_no, message: format!("expected 4 tab-separated fields, found {}", fields.len()) });
        }
        let id = |s: &str, what: &str| -> Result<u32> {
            s.trim().parse::<u32>().map_err(|e| Error::Parse { line: line_no, message: format!("bad {what} {s:?}: {e}") })
        };
        let user = id(fields[0], "user id")?;
        let item = id(fields[1], "item id")?;
        let rating: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::Parse { line: line_no, message: format!("bad rating {:?}: {e}", fields[2]) })?;
        if !rating.is_finite() || rating < 0.0 {
            return Err(Error::Parse { line: line_no, message: format!("rating {rating} must be finite and nonnegative") });
        }
        fields[3]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse { line: line_no, message: format!("bad timestamp {:?}: {e}", fields[3]) })?;
        out.push(Rating { user, item, rating });
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 0, message: "no ratings found".into() });
    }
    Ok(out)
}

pub fn read_ratings(path: &Path) -> Result<Vec<Rating>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_ratings(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MovieLensSpec {
    pub num_arms: usize,
    pub impute_rounds: usize,
    pub nmf: NmfConfig,
    /// Standard deviation of Gaussian reward noise.
    pub noise_std: f64,
}

impl Default for MovieLensSpec {
    fn default() -> Self {
        Self { num_arms: 20, impute_rounds: 3, nmf: NmfConfig::default(), noise_std: 0.1 }
    }
}

/// A bandit built from factorized ratings together with its provenance.
#[derive(Clone, Debug)]
pub struct RatingsBandit {
    pub model: LinearBanditModel,
    /// User factors, one row per user (the contexts).
    pub contexts: DMatrix<f64>,
    /// Item factors of the selected arms, one column per arm.
    pub arm_params: DMatrix<f64>,
    /// Original item ids of the arms.
    pub arm_items: Vec<u32>,
    pub reconstruction_error: f64,
}

/// Dense ratings matrix (users x items in ascending id order) and its
/// observation mask.
pub fn ratings_matrix(ratings: &[Rating]) -> (DMatrix<f64>, DMatrix<bool>, Vec<u32>, Vec<u32>) {
    let index = |ids: &[u32]| -> BTreeMap<u32, usize> { ids.iter().enumerate().map(|(i, &id)| (id, i)).collect() };
    let mut users: Vec<u32> = ratings.iter().map(|r| r.user).collect();
    let mut items: Vec<u32> = ratings.iter().map(|r| r.item).collect();
    users.sort_unstable();
    users.dedup();
    items.sort_unstable();
    items.dedup();
    let (ui, ii) = (index(&users), index(&items));
    let mut values = DMatrix::zeros(users.len(), items.len());
    let mut mask = DMatrix::from_element(users.len(), items.len(), false);
    for r in ratings {
        let (u, i) = (ui[&r.user], ii[&r.item]);
        values[(u, i)] = r.rating;
        mask[(u, i)] = true;
    }
    (values, mask, users, items)
}

/// Column-mean imputation followed by rounds of factorize-and-refill.
pub fn complete_matrix(values: &DMatrix<f64>, mask: &DMatrix<bool>, spec: &MovieLensSpec, seed: u64) -> Result<Factorization> {
    let observed: Vec<f64> = values.iter().zip(mask.iter()).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
    let global = observed.iter().sum::<f64>() / observed.len().max(1) as f64;
    let mut filled = values.clone();
    for j in 0..values.ncols() {
        let (mut sum, mut n) = (0.0, 0usize);
        for i in 0..values.nrows() {
            if mask[(i, j)] {
                sum += values[(i, j)];
                n += 1;
            }
        }
        let fill = if n > 0 { sum / n as f64 } else { global };
        for i in 0..values.nrows() {
            if !mask[(i, j)] {
                filled[(i, j)] = fill;
            }
        }
    }
    let mut fact = nmf(&filled, &spec.nmf, seed)?;
    for round in 1..spec.impute_rounds.max(1) {
        let approx = &fact.w * &fact.h;
        for (idx, v) in filled.iter_mut().enumerate() {
            if !mask[idx] {
                *v = approx[idx].max(0.0);
            }
        }
        fact = nmf(&filled, &spec.nmf, seed.wrapping_add(round as u64))?;
    }
    Ok(fact)
}

/// Builds the bandit: contexts are user factors `w_x`, arms are `num_arms`
/// item columns `h_a` drawn by seed. Features are block vectors
/// `e_a ⊗ w_x / max ||w||` of dimension `num_arms * rank`, and `theta*` stacks
/// the arm columns scaled to unit norm, so rewards are proportional to `w_x . h_a`.
pub fn bandit_from_ratings(ratings: &[Rating], spec: &MovieLensSpec, seed: u64) -> Result<RatingsBandit> {
    let (values, mask, _users, items) = ratings_matrix(ratings);
    if spec.num_arms == 0 || spec.num_arms > items.len() {
        return Err(Error::Config(format!("cannot pick {} arms from {} items", spec.num_arms, items.len())));
    }
    let fact = complete_matrix(&values, &mask, spec, seed)?;
    let k = spec.nmf.rank;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = sample(&mut rng, items.len(), spec.num_arms).into_vec();
    cols.sort_unstable();
    let arm_params = DMatrix::from_fn(k, cols.len(), |r, c| fact.h[(r, cols[c])]);
    let arm_items = cols.iter().map(|&c| items[c]).collect();

    let users = fact.w.nrows();
    let max_w = (0..users).map(|u| fact.w.row(u).norm()).fold(0.0, f64::max).max(1e-300);
    let theta_norm = arm_params.norm().max(1e-300);
    let na = cols.len();
    let dim = na * k;
    let mut features = vec![0.0; users * na * dim];
    for u in 0..users {
        for a in 0..na {
            let base = (u * na + a) * dim + a * k;
            for r in 0..k {
                features[base + r] = fact.w[(u, r)] / max_w;
            }
        }
    }
    let theta: Vec<f64> = (0..na).flat_map(|a| (0..k).map(move |r| (a, r))).map(|(a, r)| arm_params[(r, a)] / theta_norm).collect();
    let model = LinearBanditModel::new(
        dim,
        users,
        na,
        features,
        theta,
        vec![1.0 / users as f64; users],
        NoiseModel::Gaussian { std: spec.noise_std },
    )?;
    Ok(RatingsBandit { model, contexts: fact.w.clone(), arm_params, arm_items, reconstruction_error: fact.relative_error })
}

pub fn movielens_ingest(path: &Path, spec: &MovieLensSpec, seed: u64) -> Result<RatingsBandit> {
    bandit_from_ratings(&read_ratings(path)?, spec, seed)
}
