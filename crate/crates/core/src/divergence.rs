//! Divergences between state-action distributions and importance weighting.
//!
//! `D₂` is always the exponentiated 2-Rényi divergence `Σ p²/q`, whose floor is 1.
//! Under `(s,a) ~ q` the weight `w = p/q` has mean 1 and variance `D₂(p‖q) - 1`.

use serde::Serialize;

use crate::mdp::Cmp;
use crate::{Error, Result};

fn check_lengths(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Result of a 2-Rényi evaluation. Support violations are reported, not raised,
/// so boundary points can be probed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Renyi2 {
    Finite(f64),
    /// `q[index] = 0` while `p[index] > 0`.
    Infinite {
        index: usize,
    },
}

impl Renyi2 {
    /// Numeric value (`+∞` on a support violation).
    pub fn value(self) -> f64 {
        match self {
            Renyi2::Finite(v) => v,
            Renyi2::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Renyi2::Finite(_))
    }

    pub fn into_result(self) -> Result<f64> {
        match self {
            Renyi2::Finite(v) => Ok(v),
            Renyi2::Infinite { index } => Err(Error::SupportViolation { index }),
        }
    }
}

/// `D₂(p‖q) = Σ p²/q`.
pub fn renyi2(p: &[f64], q: &[f64]) -> Result<Renyi2> {
    check_lengths(p, q)?;
    let mut total = 0.0;
    for (i, (&x, &y)) in p.iter().zip(q).enumerate() {
        if x == 0.0 {
            continue;
        }
        if y <= 0.0 {
            return Ok(Renyi2::Infinite { index: i });
        }
        total += x * x / y;
    }
    Ok(Renyi2::Finite(total))
}

/// Importance-weight diagnostics for a target/behavior pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightDiagnostics {
    /// `w(s,a) = d_target(s,a) / d_behavior(s,a)`; zero off the behavior support.
    pub weights: Vec<f64>,
    /// `Var_{d_behavior}[w]`, computed from moments.
    pub exact_variance: f64,
    pub renyi2: f64,
    /// `(R_max / (1-γ))² · D₂ / N`.
    pub is_variance_bound: f64,
}

pub fn weight_diagnostics(
    d_target: &[f64],
    d_behavior: &[f64],
    n: usize,
    r_max: f64,
    gamma: f64,
) -> Result<WeightDiagnostics> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let d2 = renyi2(d_target, d_behavior)?.into_result()?;
    let weights: Vec<f64> = d_target
        .iter()
        .zip(d_behavior)
        .map(|(&t, &b)| if b > 0.0 { t / b } else { 0.0 })
        .collect();
    // E_q[w] = Σ p and E_q[w²] = Σ p²/q over the support of q; the second
    // form avoids squaring large weights before multiplying by small q.
    let mut mean = 0.0;
    let mut second = 0.0;
    for (&t, &b) in d_target.iter().zip(d_behavior) {
        if b > 0.0 && t != 0.0 {
            mean += t;
            second += t * t / b;
        }
    }
    let scale = r_max / (1.0 - gamma);
    Ok(WeightDiagnostics {
        weights,
        exact_variance: second - mean * mean,
        renyi2: d2,
        is_variance_bound: scale * scale * d2 / n as f64,
    })
}

/// `Ĵ_IS = (1/((1-γ)N)) Σ w(s_n,a_n) R(s_n,a_n)` for samples drawn under `d_behavior`.
pub fn is_estimate(samples: &[(usize, usize)], d_target: &[f64], d_behavior: &[f64], c: &Cmp) -> Result<f64> {
    let reward = c.reward().ok_or(Error::MissingReward)?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_lengths(d_target, d_behavior)?;
    check_lengths(d_target, reward)?;
    let na = c.num_actions();
    let mut total = 0.0;
    for &(s, a) in samples {
        let idx = s * na + a;
        if idx >= d_behavior.len() || a >= na {
            return Err(Error::DimensionMismatch(format!(
                "sample ({s}, {a}) out of range"
            )));
        }
        let b = d_behavior[idx];
        if b <= 0.0 {
            return Err(Error::SupportViolation { index: idx });
        }
        total += d_target[idx] / b * reward[idx];
    }
    Ok(total / ((1.0 - c.gamma()) * samples.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tv_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((total_variation(&[0.5, 0.5], &[0.8, 0.2]).unwrap() - 0.3).abs() < 1e-15);
        assert!(total_variation(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn renyi_examples() {
        let p = [0.1, 0.6, 0.3];
        assert!((renyi2(&p, &p).unwrap().value() - 1.0).abs() < 1e-15);
        let rep = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        assert!((renyi2(&[1.0, 0.0, 0.0, 0.0], &rep).unwrap().value() - 2.0).abs() < 1e-15);
        assert!((renyi2(&[0.5, 0.5, 0.0, 0.0], &[0.25; 4]).unwrap().value() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn renyi_support_violation_is_tagged() {
        let r = renyi2(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(r, Renyi2::Infinite { index: 1 });
        assert_eq!(r.value(), f64::INFINITY);
        assert!(matches!(
            r.into_result(),
            Err(Error::SupportViolation { index: 1 })
        ));
    }

    #[test]
    fn diagnostics_examples() {
        let same = weight_diagnostics(&[0.3, 0.7], &[0.3, 0.7], 10, 1.0, 0.5).unwrap();
        assert!(same.weights.iter().all(|w| (w - 1.0).abs() < 1e-15));
        assert!(same.exact_variance.abs() < 1e-15);
        assert!((same.renyi2 - 1.0).abs() < 1e-15);

        // 0.64/0.5 + 0.04/0.5 = 1.36; bound (1/0.5)² · 1.36 / 100.
        let d = weight_diagnostics(&[0.8, 0.2], &[0.5, 0.5], 100, 1.0, 0.5).unwrap();
        assert!((d.renyi2 - 1.36).abs() < 1e-14);
        assert!((d.exact_variance - 0.36).abs() < 1e-14);
        assert!((d.is_variance_bound - 0.0544).abs() < 1e-15);
    }

    #[test]
    fn is_estimate_errors() {
        let c = Cmp::new(1, 2, vec![1.0, 1.0], vec![1.0], 0.5, Some(vec![1.0, 0.0])).unwrap();
        let err = is_estimate(&[(0, 1)], &[0.5, 0.5], &[1.0, 0.0], &c).unwrap_err();
        assert!(matches!(err, Error::SupportViolation { index: 1 }));
        assert!(matches!(
            is_estimate(&[], &[0.5, 0.5], &[0.5, 0.5], &c),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn is_estimate_reduces_to_mc_when_equal() {
        let c = Cmp::new(1, 2, vec![1.0, 1.0], vec![1.0], 0.5, Some(vec![1.0, 0.25])).unwrap();
        let samples = [(0, 0), (0, 1), (0, 1)];
        let d = [0.4, 0.6];
        let is = is_estimate(&samples, &d, &d, &c).unwrap();
        let mc = crate::mdp::mc_return(&samples, &c).unwrap();
        assert!((is - mc).abs() < 1e-15);
    }

    fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(p in simplex(5), q in simplex(5), r in simplex(5)) {
            let pq = total_variation(&p, &q).unwrap();
            prop_assert_eq!(pq, total_variation(&q, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&pq));
            let pr = total_variation(&p, &r).unwrap();
            let rq = total_variation(&r, &q).unwrap();
            prop_assert!(pq <= pr + rq + 1e-12);
        }

        #[test]
        fn renyi_floor_and_uniform_identity(p in simplex(6), q in simplex(6)) {
            prop_assert!(renyi2(&p, &q).unwrap().value() >= 1.0 - 1e-12);
            let n = p.len() as f64;
            let uniform = vec![1.0 / n; p.len()];
            let expect = n * p.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((renyi2(&p, &uniform).unwrap().value() - expect).abs() < 1e-12);
        }

        #[test]
        fn weight_variance_identity(p in simplex(7), q in simplex(7)) {
            let d = weight_diagnostics(&p, &q, 1, 1.0, 0.5).unwrap();
            prop_assert!((d.exact_variance - (d.renyi2 - 1.0)).abs() <= 1e-12 * d.renyi2.max(1.0));
        }
    }
}
