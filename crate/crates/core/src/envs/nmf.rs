//! Non-negative matrix factorization `V ≈ W H` by multiplicative updates.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iter: usize,
    /// Stop once the relative error improves by less than this fraction.
    pub tol: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self { rank: 3, max_iter: 500, tol: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// `||V - W H||_F / ||V||_F`.
    pub relative_error: f64,
    pub iterations: usize,
}

fn relative_error(v: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>, v_norm: f64) -> f64 {
    (v - w * h).norm() / v_norm.max(EPS)
}

/// Factorizes a nonnegative matrix with seeded uniform initialization.
pub fn nmf(v: &DMatrix<f64>, config: &NmfConfig, seed: u64) -> Result<Factorization> {
    if config.rank == 0 || v.nrows() == 0 || v.ncols() == 0 {
        return Err(Error::Config("factorization needs a positive rank and a nonempty matrix".into()));
    }
    if v.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::Range("matrix must be finite and nonnegative".into()));
    }
    let (m, n, k) = (v.nrows(), v.ncols(), config.rank);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (v.mean() / k as f64).sqrt().max(EPS);
    let mut w = DMatrix::from_fn(m, k, |_, _| scale * rng.random::<f64>());
    let mut h = DMatrix::from_fn(k, n, |_, _| scale * rng.random::<f64>());
    let v_norm = v.norm();
    let mut err = relative_error(v, &w, &h, v_norm);
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        let wt = w.transpose();
        let num_h = &wt * v;
        let den_h = (&wt * &w) * &h;
        h.zip_zip_apply(&num_h, &den_h, |x, a, b| *x *= a / (b + EPS));
        let ht = h.transpose();
        let num_w = v * &ht;
        let den_w = &w * (&h * &ht);
        w.zip_zip_apply(&num_w, &den_w, |x, a, b| *x *= a / (b + EPS));
        let next = relative_error(v, &w, &h, v_norm);
        if !next.is_finite() {
            return Err(Error::Numerical("factorization diverged".into()));
        }
        let improvement = (err - next) / err.max(EPS);
        err = next;
        if improvement.abs() < config.tol {
            break;
        }
    }
    Ok(Factorization { w, h, relative_error: err, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_planted_rank_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = DMatrix::from_fn(40, 3, |_, _| rng.random::<f64>());
        let h = DMatrix::from_fn(3, 30, |_, _| rng.random::<f64>());
        let v = &w * &h;
        let cfg = NmfConfig { max_iter: 5000, tol: 1e-12, ..Default::default() };
        let f = nmf(&v, &cfg, 1).unwrap();
        assert!(f.relative_error <= 1e-2, "{}", f.relative_error);
        assert!(f.w.iter().chain(f.h.iter()).all(|&x| x >= 0.0));
    }

    #[test]
    fn rejects_negative_entries() {
        let v = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        assert!(nmf(&v, &NmfConfig::default(), 0).is_err());
    }
}
