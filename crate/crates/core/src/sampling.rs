//! Samplers for occupancy measures and generative-model transition estimates.
//!
//! Geometric mode is exact: a trajectory starts at `μ`, follows `π` and `P`,
//! and stops after each visited pair with probability `1 - γ`; the pair it stops
//! at is distributed as `d(s,a)`. Stationary mode instead emits every visited
//! pair of the induced chain after a burn-in of `⌈10/γ₀⌉` steps.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::divergence::total_variation;
use crate::mdp::{induced_chain, occupancy, spectral_gap, Cmp, OccupancyMeasure, TabularPolicy};
use crate::rng::{draw_index, RngSeed};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Geometric,
    Stationary,
}

/// A batch of state-action samples and its empirical measure.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancySample {
    pub samples: Vec<(usize, usize)>,
    pub empirical: OccupancyMeasure,
    /// State-action pairs visited in the environment (including burn-in).
    pub env_steps: u64,
    /// Burn-in steps discarded (stationary mode only).
    pub burn_in: u64,
}

pub fn sample_occupancy(
    c: &Cmp,
    p: &TabularPolicy,
    n: usize,
    seed: RngSeed,
    mode: SamplingMode,
) -> Result<OccupancySample> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if c.num_states() != p.num_states() || c.num_actions() != p.num_actions() {
        return Err(Error::DimensionMismatch("CMP and policy disagree".into()));
    }
    let mut rng = seed.rng();
    let na = c.num_actions();
    let mut counts = vec![0u64; c.num_pairs()];
    let mut samples = Vec::with_capacity(n);
    let mut env_steps = 0u64;
    let mut burn_in = 0u64;

    match mode {
        SamplingMode::Geometric => {
            let stop = 1.0 - c.gamma();
            for _ in 0..n {
                let mut s = draw_index(&mut rng, c.mu());
                loop {
                    let a = draw_index(&mut rng, p.row(s));
                    env_steps += 1;
                    if rng.random::<f64>() < stop {
                        samples.push((s, a));
                        counts[s * na + a] += 1;
                        break;
                    }
                    s = draw_index(&mut rng, c.transition_row(s, a));
                }
            }
        }
        SamplingMode::Stationary => {
            let info = spectral_gap(&induced_chain(c, p)?)?;
            if info.gamma0 <= 0.0 {
                return Err(Error::NoMixing);
            }
            burn_in = (10.0 / info.gamma0).ceil() as u64;
            let mut s = draw_index(&mut rng, c.mu());
            for step in 0..(burn_in + n as u64) {
                let a = draw_index(&mut rng, p.row(s));
                env_steps += 1;
                if step >= burn_in {
                    samples.push((s, a));
                    counts[s * na + a] += 1;
                }
                s = draw_index(&mut rng, c.transition_row(s, a));
            }
        }
    }

    let empirical = OccupancyMeasure::from_counts(c.num_states(), na, &counts)?;
    Ok(OccupancySample {
        samples,
        empirical,
        env_steps,
        burn_in,
    })
}

/// Transition model estimated from `n_per_pair` generative-model draws per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedModel {
    /// The source CMP with `P` replaced by `P̂`.
    pub model: Cmp,
    pub counts_per_pair: u64,
}

impl EstimatedModel {
    pub fn p_hat(&self) -> &[f64] {
        self.model.transition()
    }

    pub fn total_draws(&self) -> u64 {
        self.counts_per_pair * self.model.num_pairs() as u64
    }
}

pub fn estimate_transition_model(c: &Cmp, n_per_pair: u64, seed: RngSeed) -> Result<EstimatedModel> {
    if n_per_pair == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut rng = seed.rng();
    let ns = c.num_states();
    let mut p_hat = Vec::with_capacity(c.transition().len());
    for s in 0..ns {
        for a in 0..c.num_actions() {
            let row = c.transition_row(s, a);
            // Multinomial counts as a chain of conditional binomials.
            let mut remaining = n_per_pair;
            let mut mass = 1.0;
            let mut counts = vec![0u64; ns];
            for (t, &pt) in row.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                if t == ns - 1 || mass <= pt {
                    counts[t] = remaining;
                    break;
                }
                let cond = (pt / mass).clamp(0.0, 1.0);
                let k = if cond == 0.0 {
                    0
                } else {
                    Binomial::new(remaining, cond)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?
                        .sample(&mut rng)
                };
                counts[t] = k;
                remaining -= k;
                mass -= pt;
            }
            let total = n_per_pair as f64;
            p_hat.extend(counts.iter().map(|&k| k as f64 / total));
        }
    }
    // Normalise exactly: counts sum to n_per_pair, but the quotients may drift.
    for row in p_hat.chunks_mut(ns) {
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(EstimatedModel {
        model: c.with_transition(p_hat)?,
        counts_per_pair: n_per_pair,
    })
}

/// Occupancy of `p` on the estimated model.
pub fn occupancy_on_estimate(e: &EstimatedModel, p: &TabularPolicy) -> Result<OccupancyMeasure> {
    occupancy(&e.model, p)
}

/// `E_{(s,a)~d}[‖P̂(·|s,a) - P(·|s,a)‖₁]` under the exact occupancy of `c`.
pub fn expected_transition_error(c: &Cmp, p_hat: &[f64], p: &TabularPolicy) -> Result<f64> {
    if p_hat.len() != c.transition().len() {
        return Err(Error::DimensionMismatch(
            "estimated tensor has the wrong size".into(),
        ));
    }
    let d = occupancy(c, p)?;
    let ns = c.num_states();
    let mut total = 0.0;
    for s in 0..ns {
        for a in 0..c.num_actions() {
            let w = d.get(s, a);
            if w == 0.0 {
                continue;
            }
            let start = (s * c.num_actions() + a) * ns;
            let est = &p_hat[start..start + ns];
            total += w * 2.0 * total_variation(est, c.transition_row(s, a))?;
        }
    }
    Ok(total)
}

/// `(γ/(1-γ)) E_{(s,a)~d}[‖P̂(·|s,a) - P(·|s,a)‖₁]`.
pub fn simulation_gap_bound(c: &Cmp, e: &EstimatedModel, p: &TabularPolicy) -> Result<f64> {
    if e.model.num_states() != c.num_states() || e.model.num_actions() != c.num_actions() {
        return Err(Error::DimensionMismatch("estimate and CMP disagree".into()));
    }
    let g = c.gamma();
    Ok(g / (1.0 - g) * expected_transition_error(c, e.p_hat(), p)?)
}
