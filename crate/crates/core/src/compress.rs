//! Max-min covering of a finite candidate set of policies.
//!
//! The objective is `max_i min_{k} D(d_i ‖ d_{rep_k}) <= σ`. [`greedy_cover`]
//! seeds with the 1-center (the candidate whose worst-case divergence to all
//! others is smallest) and then adds farthest points until the radius is within
//! `σ`. The selection order does not depend on `σ`, so `K` is monotone in it.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::divergence::{renyi2, total_variation};
use crate::mdp::{occupancy, Cmp, TabularPolicy};
use crate::rng::RngSeed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Tv,
    Renyi2,
}

impl Metric {
    /// Smallest achievable divergence.
    pub fn floor(self) -> f64 {
        match self {
            Metric::Tv => 0.0,
            Metric::Renyi2 => 1.0,
        }
    }

    /// `D(p‖q)`, with `+∞` for Rényi support violations.
    pub fn eval(self, p: &[f64], q: &[f64]) -> Result<f64> {
        match self {
            Metric::Tv => total_variation(p, q),
            Metric::Renyi2 => Ok(renyi2(p, q)?.value()),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(Metric::Tv),
            "renyi2" | "renyi" => Ok(Metric::Renyi2),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

/// Candidates and their occupancies. `policies` is empty when the set was
/// built directly from occupancy vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub policies: Vec<TabularPolicy>,
    pub occupancies: Vec<Vec<f64>>,
}

impl CandidateSet {
    pub fn from_policies(c: &Cmp, policies: Vec<TabularPolicy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::InvalidArgument("candidate set is empty".into()));
        }
        let occupancies = policies
            .iter()
            .map(|p| occupancy(c, p).map(|d| d.values().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidateSet {
            policies,
            occupancies,
        })
    }

    pub fn from_occupancies(occupancies: Vec<Vec<f64>>) -> Result<Self> {
        let len = occupancies
            .first()
            .map(|d| d.len())
            .ok_or_else(|| Error::InvalidArgument("candidate set is empty".into()))?;
        for (i, d) in occupancies.iter().enumerate() {
            if d.len() != len {
                return Err(Error::DimensionMismatch(format!(
                    "candidate {i} has length {}",
                    d.len()
                )));
            }
            let sum: f64 = d.iter().sum();
            if (sum - 1.0).abs() > 1e-10 || d.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "candidate {i} is not a distribution"
                )));
            }
        }
        Ok(CandidateSet {
            policies: Vec::new(),
            occupancies,
        })
    }

    pub fn len(&self) -> usize {
        self.occupancies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancies.is_empty()
    }
}

/// All `|A|^|S|` deterministic policies, in lexicographic order of actions.
pub fn enumerate_deterministic(
    num_states: usize,
    num_actions: usize,
    cap: usize,
) -> Result<Vec<TabularPolicy>> {
    let total = (num_actions as f64).powi(num_states as i32);
    if total > cap as f64 {
        return Err(Error::InvalidArgument(format!(
            "{num_actions}^{num_states} deterministic policies exceed the cap of {cap}"
        )));
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut actions = vec![0usize; num_states];
    loop {
        out.push(TabularPolicy::deterministic(num_actions, &actions)?);
        // Odometer increment, last state fastest.
        let mut i = num_states;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            actions[i] += 1;
            if actions[i] < num_actions {
                break;
            }
            actions[i] = 0;
        }
    }
}

/// `count` policies with flat-Dirichlet rows.
pub fn random_policies(
    num_states: usize,
    num_actions: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<TabularPolicy>> {
    (0..count)
        .map(|i| {
            let mut rng = RngSeed::new(seed, i as u64).rng();
            let mut pi = Vec::with_capacity(num_states * num_actions);
            for _ in 0..num_states {
                let row: Vec<f64> = (0..num_actions).map(|_| Exp1.sample(&mut rng)).collect();
                let s: f64 = row.iter().sum();
                pi.extend(row.iter().map(|x| x / s));
            }
            // Renormalise each row exactly.
            for row in pi.chunks_mut(num_actions) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
            }
            TabularPolicy::new(num_states, num_actions, pi)
        })
        .collect()
}

/// `D[i][j] = D(d_i ‖ d_j)`. The diagonal is the metric floor exactly, so a
/// `σ` at the floor is never defeated by rounding in `Σ p²/p`.
pub fn divergence_matrix(cs: &CandidateSet, metric: Metric) -> Result<Vec<Vec<f64>>> {
    let occ = &cs.occupancies;
    (0..occ.len())
        .map(|i| {
            (0..occ.len())
                .map(|j| {
                    if i == j {
                        Ok(metric.floor())
                    } else {
                        metric.eval(&occ[i], &occ[j])
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult {
    pub representative_indices: Vec<usize>,
    pub achieved_radius: f64,
    pub metric: Metric,
    pub sigma: f64,
    /// For every candidate, the representative index covering it best.
    pub assignment: Vec<usize>,
}

pub fn greedy_cover(cs: &CandidateSet, sigma: f64, metric: Metric) -> Result<CompressionResult> {
    if cs.is_empty() {
        return Err(Error::InvalidArgument("candidate set is empty".into()));
    }
    if !(sigma >= metric.floor()) {
        return Err(Error::InvalidArgument(format!(
            "sigma = {sigma} is below the {metric:?} floor {}",
            metric.floor()
        )));
    }
    let d = divergence_matrix(cs, metric)?;
    let n = cs.len();

    // 1-center: smallest worst-case divergence; lowest index on ties.
    let worst = |j: usize| (0..n).map(|i| d[i][j]).fold(f64::NEG_INFINITY, f64::max);
    let first = (0..n).fold(0, |best, j| if worst(j) < worst(best) { j } else { best });

    let mut reps = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| d[i][first]).collect();
    let mut assignment = vec![first; n];
    loop {
        let (far, radius) =
            nearest.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        if radius <= sigma {
            return Ok(CompressionResult {
                representative_indices: reps,
                achieved_radius: radius,
                metric,
                sigma,
                assignment,
            });
        }
        if reps.contains(&far) {
            return Err(Error::Uncoverable {
                candidate: far,
                sigma,
            });
        }
        reps.push(far);
        for i in 0..n {
            if d[i][far] < nearest[i] {
                nearest[i] = d[i][far];
                assignment[i] = far;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverCheck {
    pub ok: bool,
    pub worst_candidate: usize,
    pub worst_value: f64,
    /// Representative nearest to the worst candidate.
    pub worst_representative: usize,
}

/// Recomputes the max-min objective from the occupancies.
pub fn verify_cover(cs: &CandidateSet, result: &CompressionResult) -> Result<CoverCheck> {
    if result.representative_indices.is_empty() {
        return Err(Error::InvalidArgument("no representatives".into()));
    }
    if let Some(&bad) = result.representative_indices.iter().find(|&&k| k >= cs.len()) {
        return Err(Error::InvalidArgument(format!(
            "representative {bad} out of range"
        )));
    }
    let mut check = CoverCheck {
        ok: true,
        worst_candidate: 0,
        worst_value: f64::NEG_INFINITY,
        worst_representative: result.representative_indices[0],
    };
    for (i, d_i) in cs.occupancies.iter().enumerate() {
        let mut best = (f64::INFINITY, result.representative_indices[0]);
        for &k in &result.representative_indices {
            let v = if k == i {
                result.metric.floor()
            } else {
                result.metric.eval(d_i, &cs.occupancies[k])?
            };
            if v < best.0 {
                best = (v, k);
            }
        }
        if best.0 > check.worst_value {
            check.worst_value = best.0;
            check.worst_candidate = i;
            check.worst_representative = best.1;
        }
    }
    check.ok = check.worst_value <= result.sigma;
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state_two_actions() -> Cmp {
        Cmp::new(1, 2, vec![1.0, 1.0], vec![1.0], 0.9, None).unwrap()
    }

    #[test]
    fn identical_candidates() {
        let c = single_state_two_actions();
        let p = TabularPolicy::from_rows(&[vec![0.3, 0.7]]).unwrap();
        let cs = CandidateSet::from_policies(&c, vec![p.clone(), p.clone(), p]).unwrap();
        let tv = divergence_matrix(&cs, Metric::Tv).unwrap();
        assert!(tv.iter().flatten().all(|&x| x == 0.0));
        for metric in [Metric::Tv, Metric::Renyi2] {
            let r = greedy_cover(&cs, metric.floor(), metric).unwrap();
            assert_eq!(r.representative_indices.len(), 1);
        }
    }

    #[test]
    fn orthogonal_candidates_need_two() {
        let c = single_state_two_actions();
        let a = TabularPolicy::deterministic(2, &[0]).unwrap();
        let b = TabularPolicy::deterministic(2, &[1]).unwrap();
        let cs = CandidateSet::from_policies(&c, vec![a, b]).unwrap();
        let m = divergence_matrix(&cs, Metric::Tv).unwrap();
        assert_eq!(m[0][1], 1.0);
        let r = greedy_cover(&cs, 0.5, Metric::Tv).unwrap();
        assert_eq!(r.representative_indices, vec![0, 1]);
        assert!(verify_cover(&cs, &r).unwrap().ok);
    }

    #[test]
    fn renyi_diagonal_is_one() {
        let c = single_state_two_actions();
        let cs = CandidateSet::from_policies(&c, random_policies(1, 2, 5, 3).unwrap()).unwrap();
        let m = divergence_matrix(&cs, Metric::Renyi2).unwrap();
        for (i, row) in m.iter().enumerate() {
            assert!((row[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_covers_everything_at_sigma_n() {
        let n = 5;
        let mut occ: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v
            })
            .collect();
        occ.push(vec![0.2; n]);
        occ.push(vec![0.6, 0.1, 0.1, 0.1, 0.1]);
        let cs = CandidateSet::from_occupancies(occ).unwrap();
        let r = greedy_cover(&cs, n as f64, Metric::Renyi2).unwrap();
        assert_eq!(r.representative_indices, vec![n]);
        assert!(r.achieved_radius <= n as f64 + 1e-12);
    }

    #[test]
    fn verify_detects_removed_representative() {
        let c = single_state_two_actions();
        let cs = CandidateSet::from_policies(&c, random_policies(1, 2, 12, 8).unwrap()).unwrap();
        let r = greedy_cover(&cs, 0.05, Metric::Tv).unwrap();
        assert!(r.representative_indices.len() >= 2);
        assert!(verify_cover(&cs, &r).unwrap().ok);

        let mut dropped = r.clone();
        dropped.representative_indices.pop();
        let check = verify_cover(&cs, &dropped).unwrap();
        assert!(!check.ok);
        assert!(check.worst_value > 0.05);

        let mut tight = r.clone();
        tight.sigma = r.achieved_radius / 2.0;
        assert!(!verify_cover(&cs, &tight).unwrap().ok);
    }

    #[test]
    fn k_is_monotone_in_sigma_and_deterministic() {
        let c = Cmp::new(
            2,
            2,
            vec![0.9, 0.1, 0.2, 0.8, 0.5, 0.5, 0.1, 0.9],
            vec![0.5, 0.5],
            0.8,
            None,
        )
        .unwrap();
        let cs = CandidateSet::from_policies(&c, random_policies(2, 2, 30, 21).unwrap()).unwrap();
        for metric in [Metric::Tv, Metric::Renyi2] {
            let mut prev = usize::MAX;
            for step in 0..20 {
                let sigma = metric.floor() + 0.02 * step as f64;
                let r = greedy_cover(&cs, sigma, metric).unwrap();
                assert!(r.representative_indices.len() <= prev);
                prev = r.representative_indices.len();
                assert_eq!(r, greedy_cover(&cs, sigma, metric).unwrap());
                assert!(verify_cover(&cs, &r).unwrap().ok);
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        let all = enumerate_deterministic(3, 2, 100).unwrap();
        assert_eq!(all.len(), 8);
        assert_eq!(all[1].row(2), &[0.0, 1.0]);
        assert!(enumerate_deterministic(10, 4, 1000).is_err());
    }

    #[test]
    fn sigma_below_floor_rejected() {
        let c = single_state_two_actions();
        let cs = CandidateSet::from_policies(&c, random_policies(1, 2, 2, 0).unwrap()).unwrap();
        assert!(greedy_cover(&cs, 0.5, Metric::Renyi2).is_err());
        assert!(greedy_cover(&cs, -0.1, Metric::Tv).is_err());
    }
}
