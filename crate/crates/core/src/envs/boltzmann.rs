//! Softmax behavior policies `rho(a|x) ∝ exp(k Q(x, a))`.

use crate::bandit::LinearBanditModel;
use crate::error::{dim_check, Error, Result};
use crate::mdp::{MarkovPolicy, Shape};

/// Softmax of `k * q` with log-sum-exp stabilization.
///
/// `k = 0` gives the uniform distribution, `k = +inf` the uniform
/// distribution over the argmax set and `k = -inf` over the argmin set.
pub fn boltzmann_row(q: &[f64], k: f64) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(Error::Dimension("empty action-value row".into()));
    }
    if k.is_nan() {
        return Err(Error::Config("inverse temperature is NaN".into()));
    }
    if let Some(v) = q.iter().find(|v| !v.is_finite()) {
        return Err(Error::Range(format!("action value {v} is not finite")));
    }
    let n = q.len();
    if k == 0.0 {
        return Ok(vec![1.0 / n as f64; n]);
    }
    if k.is_infinite() {
        let target = if k > 0.0 {
            q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            q.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let ties = q.iter().filter(|&&v| v == target).count() as f64;
        return Ok(q.iter().map(|&v| if v == target { 1.0 / ties } else { 0.0 }).collect());
    }
    let z: Vec<f64> = q.iter().map(|v| k * v).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.iter().map(|v| v / total).collect())
}

/// Boltzmann policy over per-cell action values laid out as [`Shape::index`].
pub fn boltzmann_policy(shape: Shape, q_values: &[f64], k: f64) -> Result<MarkovPolicy> {
    dim_check("action values", shape.cells(), q_values.len())?;
    let mut probs = Vec::with_capacity(shape.cells());
    for row in q_values.chunks(shape.num_actions) {
        probs.extend(boltzmann_row(row, k)?);
    }
    MarkovPolicy::new(shape, probs)
}

/// Per-context arm distribution from the mean rewards, context-major.
pub fn boltzmann_arms(model: &LinearBanditModel, k: f64) -> Result<Vec<f64>> {
    let mut probs = Vec::with_capacity(model.num_contexts() * model.num_arms());
    for row in model.mean_rewards().chunks(model.num_arms()) {
        probs.extend(boltzmann_row(row, k)?);
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn limits_and_closed_form() {
        assert_eq!(boltzmann_row(&[3.0, 1.0, 2.0], 0.0).unwrap(), vec![1.0 / 3.0; 3]);
        assert_eq!(boltzmann_row(&[0.1, 0.9, 0.3], f64::INFINITY).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(boltzmann_row(&[0.9, 0.1, 0.9], f64::INFINITY).unwrap(), vec![0.5, 0.0, 0.5]);
        assert_eq!(boltzmann_row(&[0.1, 0.9], f64::NEG_INFINITY).unwrap(), vec![1.0, 0.0]);
        let p = boltzmann_row(&[1.0, 0.0], 5.0).unwrap();
        let e5 = 5f64.exp();
        assert!((p[0] - e5 / (e5 + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e5 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nan() {
        assert!(boltzmann_row(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(boltzmann_row(&[0.0, 0.0], f64::NAN).is_err());
    }

    #[test]
    fn large_k_is_stable() {
        let p = boltzmann_row(&[1000.0, 999.0], 1e6).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(p[0], 1.0);
    }

    proptest! {
        #[test]
        fn argmax_mass_is_monotone(q in prop::collection::vec(-5.0f64..5.0, 2..8), k in 0.0f64..20.0, dk in 0.0f64..20.0) {
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mass = |k: f64| -> f64 {
                let p = boltzmann_row(&q, k).unwrap();
                q.iter().zip(&p).filter(|(v, _)| **v == best).map(|(_, p)| p).sum()
            };
            let p = boltzmann_row(&q, k).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(mass(k + dk) >= mass(k) - 1e-12);
            prop_assert!(mass(f64::INFINITY) >= mass(k + dk) - 1e-12);
        }
    }
}
