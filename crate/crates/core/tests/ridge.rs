//! Incremental ridge updates against a from-scratch solve.

use hybrid_rl::bandit::RidgeState;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_ball_point(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = rng.random::<f64>() / norm.max(1e-12);
    v.iter().map(|x| x * scale).collect()
}

/// `(lambda I + X^T X)^{-1} X^T y` by LU on the normal equations.
fn scratch_solve(d: usize, lambda: f64, xs: &[Vec<f64>], ys: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let mut gram = DMatrix::identity(d, d) * lambda;
    let mut b = DVector::zeros(d);
    for (x, &y) in xs.iter().zip(ys) {
        let v = DVector::from_column_slice(x);
        gram += &v * v.transpose();
        b += v * y;
    }
    let lu = gram.clone().lu();
    (lu.solve(&b).unwrap(), lu.try_inverse().unwrap())
}

#[test]
fn rank_one_path_matches_scratch_solve() {
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=8);
        let lambda = rng.random_range(0.5..5.0);
        let n = rng.random_range(1..=60);
        let mut state = RidgeState::new(d, lambda).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x = unit_ball_point(d, &mut rng);
            let y = rng.random_range(-1.0..1.0);
            state.absorb_rank_one(&x, y).unwrap();
            xs.push(x);
            ys.push(y);
        }
        let (theta, inv) = scratch_solve(d, lambda, &xs, &ys);
        let diff = (state.theta_hat() - &theta).amax();
        assert!(diff < 1e-9, "seed {seed}: theta differs by {diff}");
        let probe = unit_ball_point(d, &mut rng);
        let p = DVector::from_column_slice(&probe);
        let expected = (p.transpose() * &inv * &p)[(0, 0)];
        assert!((state.inv_norm_sq(&probe) - expected).abs() < 1e-9, "seed {seed}");
        assert_eq!(state.count(), n);
    }
}

#[test]
fn batch_and_single_absorb_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = 6;
    let samples: Vec<(Vec<f64>, f64)> = (0..200).map(|_| (unit_ball_point(d, &mut rng), rng.random())).collect();
    let mut one = RidgeState::new(d, 1.0).unwrap();
    for (x, y) in &samples {
        one.absorb(x, *y).unwrap();
    }
    let mut batch = RidgeState::new(d, 1.0).unwrap();
    batch.absorb_batch(samples.iter().map(|(x, y)| (x.as_slice(), *y))).unwrap();
    assert!((one.theta_hat() - batch.theta_hat()).amax() < 1e-12);
    assert_eq!(one.gram(), batch.gram());
}

#[test]
fn sparse_features_use_the_same_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 40;
    let mut state = RidgeState::new(d, 2.0).unwrap();
    for _ in 0..100 {
        let mut x = vec![0.0; d];
        let block = rng.random_range(0..10) * 4;
        let dense = unit_ball_point(4, &mut rng);
        x[block..block + 4].copy_from_slice(&dense);
        state.absorb_rank_one(&x, rng.random()).unwrap();
    }
    let mut x = vec![0.0; d];
    x[8..12].copy_from_slice(&unit_ball_point(4, &mut rng));
    let p = DVector::from_column_slice(&x);
    let g_inv = state.gram().clone().try_inverse().unwrap();
    let expected = (p.transpose() * g_inv * &p)[(0, 0)];
    assert!((state.inv_norm_sq(&x) - expected).abs() < 1e-12);
}
