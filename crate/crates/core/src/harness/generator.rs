//! Seeded random CMP generators.
//!
//! The Garnet variant sends every pair to `branching` distinct next states with
//! flat-Dirichlet weights. The reversible variant builds, per action, a
//! symmetric weight matrix on a shared support (a ring plus random chords) and
//! turns it into a lazy, symmetric, doubly-stochastic kernel. Every policy-
//! induced chain is then a mixture of symmetric kernels, hence symmetric, and
//! the uniform initial distribution is stationary.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::mdp::Cmp;
use crate::rng::RngSeed;
use crate::{Error, Result};

fn default_gamma() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub branching: usize,
    pub seed: u64,
    #[serde(default)]
    pub reversible: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

/// Off-diagonal mass never exceeds `1 / LAZINESS` of a row.
const LAZINESS: f64 = 1.25;

pub fn generate_random_mdp(cfg: &GeneratorConfig) -> Result<Cmp> {
    let (ns, na) = (cfg.num_states, cfg.num_actions);
    if ns == 0 || na == 0 {
        return Err(Error::InvalidArgument(
            "num_states and num_actions must be positive".into(),
        ));
    }
    if cfg.branching == 0 || cfg.branching > ns {
        return Err(Error::InvalidArgument(format!(
            "branching must lie in 1..={ns}, got {}",
            cfg.branching
        )));
    }
    let mut rng = RngSeed::new(cfg.seed, 0).rng();
    let transition = if cfg.reversible {
        reversible_kernel(ns, na, cfg.branching, &mut rng)
    } else {
        garnet_kernel(ns, na, cfg.branching, &mut rng)
    };
    let reward: Vec<f64> = (0..ns * na).map(|_| rng.random::<f64>()).collect();
    let mu = vec![1.0 / ns as f64; ns];
    Cmp::new(ns, na, transition, mu, cfg.gamma, None)?.with_reward(reward, 1.0)
}

fn garnet_kernel<R: Rng>(ns: usize, na: usize, branching: usize, rng: &mut R) -> Vec<f64> {
    let mut p = vec![0.0; ns * na * ns];
    for pair in 0..ns * na {
        let targets = sample(rng, ns, branching).into_vec();
        let weights: Vec<f64> = targets.iter().map(|_| Exp1.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        let row = &mut p[pair * ns..(pair + 1) * ns];
        for (&t, &w) in targets.iter().zip(&weights) {
            row[t] = w / total;
        }
        fix_row_sum(row);
    }
    p
}

fn reversible_kernel<R: Rng>(ns: usize, na: usize, branching: usize, rng: &mut R) -> Vec<f64> {
    // Shared symmetric support and base weights: ring edges keep every chain
    // irreducible, up to `branching` random chords per state add structure.
    let mut base = vec![0.0; ns * ns];
    let link = |base: &mut Vec<f64>, s: usize, t: usize, w: f64| {
        if s != t {
            base[s * ns + t] += w;
            base[t * ns + s] += w;
        }
    };
    for s in 0..ns {
        link(&mut base, s, (s + 1) % ns, 1.0);
    }
    for s in 0..ns {
        for t in sample(rng, ns, branching).into_vec() {
            let w = rng.random::<f64>();
            link(&mut base, s, t, w);
        }
    }

    // Action-specific symmetric perturbations on the same support.
    let mut weights = Vec::with_capacity(na);
    for _ in 0..na {
        let mut w = base.clone();
        for s in 0..ns {
            for t in s + 1..ns {
                if base[s * ns + t] > 0.0 {
                    let scale = 0.5 + rng.random::<f64>();
                    w[s * ns + t] *= scale;
                    w[t * ns + s] *= scale;
                }
            }
        }
        weights.push(w);
    }

    let max_row = weights
        .iter()
        .flat_map(|w| w.chunks(ns).map(|r| r.iter().sum::<f64>()))
        .fold(0.0, f64::max);
    let c = if max_row > 0.0 { LAZINESS * max_row } else { 1.0 };

    let mut p = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for (a, w) in weights.iter().enumerate() {
            let row = &mut p[(s * na + a) * ns..(s * na + a + 1) * ns];
            let mut off = 0.0;
            for t in 0..ns {
                if t != s {
                    row[t] = w[s * ns + t] / c;
                    off += row[t];
                }
            }
            row[s] = 1.0 - off;
        }
    }
    p
}

/// Pushes the rounding residue of a row into its largest entry.
fn fix_row_sum(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if let Some(big) = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])) {
        row[big] += 1.0 - sum;
    }
}
