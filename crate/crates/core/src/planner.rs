//! Concentration bounds and sample-size formulas.
//!
//! Every budget is evaluated exactly as published and tagged with a
//! [`FormulaId`]. Known inconsistencies between formulas are surfaced through
//! [`SampleBudget::flags`] rather than corrected:
//!
//! * the single-policy known-model budget uses the factor `8` while the
//!   K-policy budget uses `2K`, so the two disagree by 4x at `K = 1`;
//! * the unknown-model Rényi budgets are written in `|S|`-based terms, whereas
//!   substituting the TV/Rényi threshold conversions into the unknown-model TV
//!   budget gives `|SA|`-based terms; that substitution is reported as well.
//!
//! | id | budget |
//! |----|--------|
//! | `weissman` | `2a ln(2/δ) / ε²` |
//! | `chain_concentration` | `2(2-γ₀) ln(2/δ) / (γ₀ ε²)` |
//! | `tv_known_single` | `8(2-γ₀) ln(2/δ) / (γ₀ σ²)` |
//! | `tv_known_k` | `2K(2-γ₀) ln(2/δ) / (γ₀ σ²)` |
//! | `tv_unknown_per_pair` | `8γ²|S| ln(2/δ) / ((1-γ)² σ²)` |
//! | `tv_unknown_total` | `8γ²|S|²|A| ln(2/δ) / ((1-γ)² σ²)` |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::closed_form_tv;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    Weissman,
    ChainConcentration,
    TvKnownSingle,
    #[serde(rename = "tv_known_K")]
    TvKnownK,
    TvUnknownPerPair,
    TvUnknownTotal,
    RenyiKnownLower,
    RenyiKnownUpper,
    RenyiUnknownLower,
    RenyiUnknownUpper,
}

impl FormulaId {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaId::Weissman => "weissman",
            FormulaId::ChainConcentration => "chain_concentration",
            FormulaId::TvKnownSingle => "tv_known_single",
            FormulaId::TvKnownK => "tv_known_K",
            FormulaId::TvUnknownPerPair => "tv_unknown_per_pair",
            FormulaId::TvUnknownTotal => "tv_unknown_total",
            FormulaId::RenyiKnownLower => "renyi_known_lower",
            FormulaId::RenyiKnownUpper => "renyi_known_upper",
            FormulaId::RenyiUnknownLower => "renyi_unknown_lower",
            FormulaId::RenyiUnknownUpper => "renyi_unknown_upper",
        }
    }
}

impl std::fmt::Display for FormulaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The output of one sample-size formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub formula_id: FormulaId,
    pub inputs: BTreeMap<String, f64>,
    pub n_real: f64,
    /// `⌈n_real⌉`, saturating at `u64::MAX`.
    pub n_int: u64,
    pub flags: Vec<String>,
}

impl SampleBudget {
    fn new(formula_id: FormulaId, inputs: &[(&str, f64)], n_real: f64) -> Self {
        let n_int = if n_real.is_finite() && n_real < u64::MAX as f64 {
            n_real.ceil() as u64
        } else {
            u64::MAX
        };
        SampleBudget {
            formula_id,
            inputs: inputs.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            n_real,
            n_int,
            flags: Vec::new(),
        }
    }

    fn flag(mut self, flag: &str) -> Self {
        self.flags.push(flag.to_string());
        self
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {x}"
        )));
    }
    Ok(())
}

fn check_gamma0(gamma0: f64) -> Result<()> {
    if gamma0 == 0.0 {
        return Err(Error::NoMixing);
    }
    if !(gamma0 > 0.0 && gamma0 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma0 must lie in (0, 1], got {gamma0}"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    Ok(())
}

fn log_term(delta: f64) -> f64 {
    (2.0 / delta).ln()
}

// =============================================================================
// L1 deviation of an empirical distribution
// =============================================================================

/// Deviation `ε = √(2a ln(2/δ) / N)` reached with `N` samples over `a` outcomes.
pub fn weissman_epsilon(a: usize, delta: f64, n: f64) -> Result<f64> {
    if a < 2 {
        return Err(Error::InvalidArgument(format!(
            "alphabet size must be >= 2, got {a}"
        )));
    }
    check_delta(delta)?;
    check_positive("N", n)?;
    Ok((2.0 * a as f64 * log_term(delta) / n).sqrt())
}

/// Samples `N = 2a ln(2/δ) / ε²` needed for L1 deviation `ε`.
pub fn weissman_samples(a: usize, delta: f64, epsilon: f64) -> Result<SampleBudget> {
    if a < 2 {
        return Err(Error::InvalidArgument(format!(
            "alphabet size must be >= 2, got {a}"
        )));
    }
    check_delta(delta)?;
    check_positive("epsilon", epsilon)?;
    let n = 2.0 * a as f64 * log_term(delta) / (epsilon * epsilon);
    Ok(SampleBudget::new(
        FormulaId::Weissman,
        &[("a", a as f64), ("delta", delta), ("epsilon", epsilon)],
        n,
    ))
}

// =============================================================================
// Markov-chain concentration
// =============================================================================

/// Tail bound `2 exp(-γ₀ ε² N / (2(2-γ₀)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainBound {
    pub raw: f64,
    /// `min(raw, 1)`.
    pub probability: f64,
}

pub fn chain_concentration(gamma0: f64, epsilon: f64, n: f64) -> Result<ChainBound> {
    check_gamma0(gamma0)?;
    if !(epsilon >= 0.0) || !(n >= 0.0) {
        return Err(Error::InvalidArgument(
            "epsilon and N must be non-negative".into(),
        ));
    }
    let raw = 2.0 * (-gamma0 * epsilon * epsilon * n / (2.0 * (2.0 - gamma0))).exp();
    Ok(ChainBound {
        raw,
        probability: raw.min(1.0),
    })
}

/// Inverse of [`chain_concentration`]: `N = 2(2-γ₀) ln(2/δ) / (γ₀ ε²)`.
pub fn chain_concentration_samples(gamma0: f64, epsilon: f64, delta: f64) -> Result<SampleBudget> {
    check_gamma0(gamma0)?;
    check_positive("epsilon", epsilon)?;
    check_delta(delta)?;
    let n = 2.0 * (2.0 - gamma0) * log_term(delta) / (gamma0 * epsilon * epsilon);
    Ok(SampleBudget::new(
        FormulaId::ChainConcentration,
        &[("gamma0", gamma0), ("epsilon", epsilon), ("delta", delta)],
        n,
    ))
}

// =============================================================================
// Total variation budgets
// =============================================================================

pub fn tv_known_single(gamma0: f64, sigma_tv: f64, delta: f64) -> Result<SampleBudget> {
    check_gamma0(gamma0)?;
    check_positive("sigma_tv", sigma_tv)?;
    check_delta(delta)?;
    let n = 8.0 * (2.0 - gamma0) / (gamma0 * sigma_tv * sigma_tv) * log_term(delta);
    Ok(SampleBudget::new(
        FormulaId::TvKnownSingle,
        &[("gamma0", gamma0), ("sigma_tv", sigma_tv), ("delta", delta)],
        n,
    ))
}

pub fn tv_known_k(gamma0: f64, sigma_tv: f64, delta: f64, k: usize) -> Result<SampleBudget> {
    check_gamma0(gamma0)?;
    check_positive("sigma_tv", sigma_tv)?;
    check_delta(delta)?;
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let kf = k as f64;
    let n = 2.0 * kf * (2.0 - gamma0) / (gamma0 * sigma_tv * sigma_tv) * log_term(delta);
    let mut budget = SampleBudget::new(
        FormulaId::TvKnownK,
        &[
            ("gamma0", gamma0),
            ("sigma_tv", sigma_tv),
            ("delta", delta),
            ("K", kf),
        ],
        n,
    );
    budget = match k {
        4 => budget.flag("coincides_with_single_policy_factor_8"),
        _ => budget.flag("factor_2K_differs_from_single_policy_factor_8"),
    };
    Ok(budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownScope {
    PerPair,
    Total,
}

pub fn tv_unknown(
    gamma: f64,
    s_count: usize,
    a_count: usize,
    sigma_tv: f64,
    delta: f64,
    scope: UnknownScope,
) -> Result<SampleBudget> {
    check_gamma(gamma)?;
    check_positive("sigma_tv", sigma_tv)?;
    check_delta(delta)?;
    if s_count == 0 || a_count == 0 {
        return Err(Error::InvalidArgument("|S| and |A| must be positive".into()));
    }
    let (s, a) = (s_count as f64, a_count as f64);
    let per_pair = 8.0 * gamma * gamma * s / ((1.0 - gamma).powi(2) * sigma_tv * sigma_tv) * log_term(delta);
    let inputs = [
        ("gamma", gamma),
        ("S", s),
        ("A", a),
        ("sigma_tv", sigma_tv),
        ("delta", delta),
    ];
    Ok(match scope {
        UnknownScope::PerPair => SampleBudget::new(FormulaId::TvUnknownPerPair, &inputs, per_pair),
        UnknownScope::Total => SampleBudget::new(FormulaId::TvUnknownTotal, &inputs, per_pair * s * a),
    })
}

// =============================================================================
// Rényi budgets
// =============================================================================

/// Lower/upper budget pair for a Rényi threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenyiBounds {
    pub lower: SampleBudget,
    pub upper: SampleBudget,
    /// TV budgets evaluated at the converted thresholds (unknown model only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rederived_lower: Option<SampleBudget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rederived_upper: Option<SampleBudget>,
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 1.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must exceed the divergence floor 1, got {sigma2}"
        )));
    }
    Ok(())
}

pub fn renyi_known_bounds(
    gamma0: f64,
    sigma2: f64,
    n_pairs: usize,
    k: usize,
    delta: f64,
) -> Result<RenyiBounds> {
    check_gamma0(gamma0)?;
    check_sigma2(sigma2)?;
    check_delta(delta)?;
    if n_pairs < 3 {
        return Err(Error::InvalidArgument(format!(
            "|SA| must be >= 3, got {n_pairs}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let (n, kf, l) = (n_pairs as f64, k as f64, log_term(delta));
    let lower = kf * (2.0 - gamma0) * n * n / (2.0 * gamma0 * (sigma2 - 1.0) * (n - 1.0)) * l;
    let upper = kf * (2.0 - gamma0) * sigma2 * (n - 1.0).powi(2)
        / (2.0 * gamma0 * (sigma2 - 1.0).powi(2) * (n - 2.0))
        * l;
    let inputs = [
        ("gamma0", gamma0),
        ("sigma2", sigma2),
        ("n_pairs", n),
        ("K", kf),
        ("delta", delta),
    ];
    let mut lower = SampleBudget::new(FormulaId::RenyiKnownLower, &inputs, lower);
    let mut upper = SampleBudget::new(FormulaId::RenyiKnownUpper, &inputs, upper);
    mark_renyi_pair(&mut lower, &mut upper, sigma2, n_pairs);
    Ok(RenyiBounds {
        lower,
        upper,
        rederived_lower: None,
        rederived_upper: None,
    })
}

pub fn renyi_unknown_bounds(
    gamma: f64,
    s_count: usize,
    a_count: usize,
    sigma2: f64,
    delta: f64,
) -> Result<RenyiBounds> {
    check_gamma(gamma)?;
    check_sigma2(sigma2)?;
    check_delta(delta)?;
    if s_count < 3 {
        return Err(Error::InvalidArgument(format!("|S| must be >= 3, got {s_count}")));
    }
    if a_count == 0 {
        return Err(Error::InvalidArgument("|A| must be positive".into()));
    }
    let (s, a, l) = (s_count as f64, a_count as f64, log_term(delta));
    let g2 = gamma * gamma;
    let h2 = (1.0 - gamma).powi(2);
    let lower = g2 * s.powi(4) * a / (2.0 * h2 * (sigma2 - 1.0) * (s - 1.0)) * l;
    let upper =
        g2 * sigma2 * (s - 1.0).powi(2) * s * s * a / (2.0 * h2 * (sigma2 - 1.0).powi(2) * (s - 2.0)) * l;
    let inputs = [
        ("gamma", gamma),
        ("S", s),
        ("A", a),
        ("sigma2", sigma2),
        ("delta", delta),
    ];
    let mut lower = SampleBudget::new(FormulaId::RenyiUnknownLower, &inputs, lower);
    let mut upper = SampleBudget::new(FormulaId::RenyiUnknownUpper, &inputs, upper);
    let n_pairs = s_count * a_count;
    mark_renyi_pair(&mut lower, &mut upper, sigma2, n_pairs);

    let (rederived_lower, rederived_upper) = if n_pairs >= 3 {
        let tv = closed_form_tv(n_pairs, sigma2)?;
        let lo = tv_unknown(gamma, s_count, a_count, tv.max_tv, delta, UnknownScope::Total)?
            .flag("rederived_from_max_tv");
        let hi = tv_unknown(gamma, s_count, a_count, tv.min_tv, delta, UnknownScope::Total)?
            .flag("rederived_from_min_tv");
        (Some(lo), Some(hi))
    } else {
        (None, None)
    };
    Ok(RenyiBounds {
        lower,
        upper,
        rederived_lower,
        rederived_upper,
    })
}

fn mark_renyi_pair(lower: &mut SampleBudget, upper: &mut SampleBudget, sigma2: f64, n_pairs: usize) {
    if sigma2 >= n_pairs as f64 {
        lower.flags.push("outside_meaningful_range".into());
        upper.flags.push("outside_meaningful_range".into());
    }
    if lower.n_real > upper.n_real {
        lower.flags.push("lower_exceeds_upper".into());
        upper.flags.push("lower_exceeds_upper".into());
    }
}

// =============================================================================
// Meaningful thresholds
// =============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "metric", content = "value")]
pub enum Threshold {
    Tv(f64),
    Renyi2(f64),
}

/// Whether a threshold can be violated at all, given `n` pairs.
///
/// For `D₂` the exact limit is `n` (the maximum of `D₂(·‖uniform)`, attained at
/// the vertices). For TV the published limit `√((n-1)/n)` is reported next to
/// the true maximum TV from the uniform point, `(n-1)/n`; `meaningful` uses the
/// true maximum and `meaningful_printed` the published one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub n_pairs: usize,
    pub threshold: Threshold,
    pub meaningful: bool,
    pub meaningful_printed: bool,
    pub printed_limit: f64,
    pub oracle_limit: f64,
}

pub fn threshold_meaningful(n_pairs: usize, threshold: Threshold) -> Result<ThresholdReport> {
    if n_pairs < 2 {
        return Err(Error::InvalidArgument(format!(
            "|SA| must be >= 2, got {n_pairs}"
        )));
    }
    let n = n_pairs as f64;
    let (printed_limit, oracle_limit, value) = match threshold {
        Threshold::Renyi2(v) => (n, n, v),
        Threshold::Tv(v) => (((n - 1.0) / n).sqrt(), (n - 1.0) / n, v),
    };
    Ok(ThresholdReport {
        n_pairs,
        threshold,
        meaningful: value < oracle_limit,
        meaningful_printed: value < printed_limit,
        printed_limit,
        oracle_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weissman_examples() {
        let b = weissman_samples(10, 0.1, 0.2).unwrap();
        assert!((b.n_real - 1497.866136).abs() < 1e-5, "{}", b.n_real);
        assert_eq!(b.n_int, 1498);
        let eps = weissman_epsilon(4, 0.05, 800.0).unwrap();
        assert!((eps - 0.192065).abs() < 1e-6, "{eps}");
        let e1 = weissman_epsilon(4, 0.05, 100.0).unwrap();
        let e4 = weissman_epsilon(4, 0.05, 400.0).unwrap();
        assert!((e1 / e4 - 2.0).abs() < 1e-12);
        assert!(weissman_samples(1, 0.1, 0.2).is_err());
        assert!(weissman_samples(3, 0.0, 0.2).is_err());
        assert!(weissman_epsilon(3, 0.1, 0.0).is_err());
    }

    #[test]
    fn chain_examples() {
        let b = chain_concentration(1.0, 0.1, 1000.0).unwrap();
        assert!((b.raw - 2.0 * (-5.0f64).exp()).abs() < 1e-15);
        assert!((b.raw - 0.013476).abs() < 1e-6);
        let vac = chain_concentration(0.5, 0.0, 1000.0).unwrap();
        assert_eq!(vac.raw, 2.0);
        assert_eq!(vac.probability, 1.0);
        let n = chain_concentration_samples(1.0, 0.1, 0.1).unwrap();
        assert!((n.n_real - 599.146).abs() < 1e-3);
        assert_eq!(n.n_int, 600);
        assert!(matches!(
            chain_concentration(0.0, 0.1, 10.0),
            Err(Error::NoMixing)
        ));
    }

    #[test]
    fn tv_known_examples() {
        let b = tv_known_single(0.5, 0.1, 0.1).unwrap();
        assert!((b.n_real - 7189.757).abs() < 1e-3);
        assert_eq!(b.n_int, 7190);
        let b = tv_known_single(1.0, 0.2, 0.05).unwrap();
        assert!((b.n_real - 737.775).abs() < 1e-3);
        assert_eq!(b.n_int, 738);
        let half = tv_known_single(0.3, 0.05, 0.1).unwrap();
        let full = tv_known_single(0.3, 0.1, 0.1).unwrap();
        assert!((half.n_real / full.n_real - 4.0).abs() < 1e-12);
        assert!(matches!(tv_known_single(0.0, 0.1, 0.1), Err(Error::NoMixing)));
    }

    #[test]
    fn tv_known_k_examples() {
        let b = tv_known_k(1.0, 0.2, 0.05, 5).unwrap();
        assert!((b.n_real - 922.219).abs() < 1e-3);
        assert_eq!(b.n_int, 923);
        let four = tv_known_k(0.7, 0.15, 0.05, 4).unwrap();
        let single = tv_known_single(0.7, 0.15, 0.05).unwrap();
        assert!((four.n_real - single.n_real).abs() <= 1e-12 * single.n_real);
        assert!(four.flags.iter().any(|f| f.contains("coincides")));
        let k3 = tv_known_k(0.7, 0.15, 0.05, 3).unwrap();
        let k6 = tv_known_k(0.7, 0.15, 0.05, 6).unwrap();
        assert!((k6.n_real / k3.n_real - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tv_unknown_examples() {
        let per = tv_unknown(0.9, 5, 3, 0.1, 0.05, UnknownScope::PerPair).unwrap();
        assert!((per.n_real / 1.19520e6 - 1.0).abs() < 1e-4, "{}", per.n_real);
        let total = tv_unknown(0.9, 5, 3, 0.1, 0.05, UnknownScope::Total).unwrap();
        assert_eq!(total.n_real, per.n_real * 15.0);
        assert!((total.n_real / 1.7928e7 - 1.0).abs() < 1e-4);
        let far = tv_unknown(0.99, 5, 3, 0.1, 0.05, UnknownScope::PerPair).unwrap();
        assert!((far.n_real / per.n_real - 121.0).abs() < 1e-9);
        assert!(tv_unknown(1.0, 5, 3, 0.1, 0.05, UnknownScope::PerPair).is_err());
    }

    #[test]
    fn renyi_known_examples() {
        let b = renyi_known_bounds(1.0, 2.0, 8, 1, 0.1).unwrap();
        assert!((b.lower.n_real - 13.6946).abs() < 1e-3, "{}", b.lower.n_real);
        assert!((b.upper.n_real - 24.4655).abs() < 1e-3, "{}", b.upper.n_real);
        assert_eq!((b.lower.n_int, b.upper.n_int), (14, 25));
        let near = renyi_known_bounds(1.0, 1.0 + 1e-9, 8, 1, 0.1).unwrap();
        assert!(near.lower.n_real > 1e9 && near.upper.n_real > 1e9);
        let double = renyi_known_bounds(1.0, 2.0, 8, 2, 0.1).unwrap();
        assert!((double.lower.n_real / b.lower.n_real - 2.0).abs() < 1e-12);
        assert!((double.upper.n_real / b.upper.n_real - 2.0).abs() < 1e-12);
        assert!(renyi_known_bounds(1.0, 1.0, 8, 1, 0.1).is_err());
        assert!(renyi_known_bounds(1.0, 2.0, 2, 1, 0.1).is_err());
    }

    #[test]
    fn renyi_unknown_examples() {
        let b = renyi_unknown_bounds(0.9, 5, 3, 2.0, 0.1).unwrap();
        // Worked values are quoted truncated: 56872.10 and 97061.73.
        assert_eq!(b.lower.n_real.floor(), 56872.0);
        assert_eq!(b.upper.n_real.floor(), 97061.0);
        assert_eq!((b.lower.n_int, b.upper.n_int), (56873, 97062));
        let n = 15.0_f64;
        let sigma_tv = ((n - 1.0) * 1.0).sqrt() / n;
        let expect = tv_unknown(0.9, 5, 3, sigma_tv, 0.1, UnknownScope::Total).unwrap();
        assert_eq!(b.rederived_lower.as_ref().unwrap().n_real, expect.n_real);
        assert!(renyi_unknown_bounds(0.9, 2, 3, 2.0, 0.1).is_err());
        let near = renyi_unknown_bounds(0.9, 5, 3, 1.0 + 1e-9, 0.1).unwrap();
        assert!(near.lower.n_real > 1e12);
    }

    #[test]
    fn threshold_examples() {
        let r = threshold_meaningful(4, Threshold::Renyi2(4.0)).unwrap();
        assert!(!r.meaningful);
        assert_eq!(r.oracle_limit, 4.0);
        let r = threshold_meaningful(4, Threshold::Tv(0.5)).unwrap();
        assert!((r.printed_limit - 0.8660254).abs() < 1e-7);
        assert_eq!(r.oracle_limit, 0.75);
        assert!(r.meaningful);
        let r = threshold_meaningful(4, Threshold::Tv(0.8)).unwrap();
        assert!(!r.meaningful && r.meaningful_printed);
        assert!(
            threshold_meaningful(2, Threshold::Renyi2(1.5))
                .unwrap()
                .meaningful
        );
        assert!(threshold_meaningful(1, Threshold::Tv(0.1)).is_err());
    }

    #[test]
    fn budget_serializes_formula_id() {
        let b = tv_known_k(1.0, 0.2, 0.05, 5).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert!(json.contains("\"formula_id\":\"tv_known_K\""));
    }

    proptest! {
        #[test]
        fn single_matches_chain_inversion(g0 in 0.01f64..1.0, sigma in 0.01f64..1.0, delta in 0.001f64..0.99) {
            let a = tv_known_single(g0, sigma, delta).unwrap().n_real;
            let b = chain_concentration_samples(g0, sigma / 2.0, delta).unwrap().n_real;
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn budgets_are_monotone(
            g0 in 0.05f64..1.0,
            gamma in 0.1f64..0.95,
            sigma in 0.02f64..0.5,
            bump in 1.01f64..2.0,
            delta in 0.01f64..0.5,
            k in 1usize..6,
            s in 3usize..8,
            a in 1usize..5,
        ) {
            let sigma_hi = sigma * bump;
            let delta_hi = (delta * bump).min(0.99);
            let ok = |lo: f64, hi: f64| hi <= lo * (1.0 + 1e-12);
            // Non-increasing in sigma and delta.
            prop_assert!(ok(tv_known_single(g0, sigma, delta)?.n_real, tv_known_single(g0, sigma_hi, delta)?.n_real));
            prop_assert!(ok(tv_known_single(g0, sigma, delta)?.n_real, tv_known_single(g0, sigma, delta_hi)?.n_real));
            prop_assert!(ok(tv_known_k(g0, sigma, delta, k)?.n_real, tv_known_k(g0, sigma_hi, delta, k)?.n_real));
            let per = |sig: f64, d: f64, s: usize, a: usize| tv_unknown(gamma, s, a, sig, d, UnknownScope::Total).map(|b| b.n_real);
            prop_assert!(ok(per(sigma, delta, s, a)?, per(sigma_hi, delta, s, a)?));
            prop_assert!(ok(per(sigma, delta, s, a)?, per(sigma, delta_hi, s, a)?));
            // Non-decreasing in K, |S|, |A|.
            prop_assert!(tv_known_k(g0, sigma, delta, k + 1)?.n_real >= tv_known_k(g0, sigma, delta, k)?.n_real);
            prop_assert!(per(sigma, delta, s + 1, a)? >= per(sigma, delta, s, a)?);
            prop_assert!(per(sigma, delta, s, a + 1)? >= per(sigma, delta, s, a)?);

            let n_pairs = s * a.max(1) + 1;
            let s2 = 1.0 + sigma;
            let s2_hi = 1.0 + sigma_hi;
            let rk = |s2: f64, d: f64, k: usize, n: usize| renyi_known_bounds(g0, s2, n, k, d);
            prop_assert!(ok(rk(s2, delta, k, n_pairs)?.lower.n_real, rk(s2_hi, delta, k, n_pairs)?.lower.n_real));
            prop_assert!(ok(rk(s2, delta, k, n_pairs)?.upper.n_real, rk(s2_hi, delta, k, n_pairs)?.upper.n_real));
            prop_assert!(ok(rk(s2, delta, k, n_pairs)?.lower.n_real, rk(s2, delta_hi, k, n_pairs)?.lower.n_real));
            prop_assert!(rk(s2, delta, k + 1, n_pairs)?.upper.n_real >= rk(s2, delta, k, n_pairs)?.upper.n_real);
            let ru = |s2: f64, s: usize, a: usize| renyi_unknown_bounds(gamma, s, a, s2, delta);
            prop_assert!(ok(ru(s2, s, a)?.lower.n_real, ru(s2_hi, s, a)?.lower.n_real));
            prop_assert!(ok(ru(s2, s, a)?.upper.n_real, ru(s2_hi, s, a)?.upper.n_real));
            prop_assert!(ru(s2, s, a + 1)?.lower.n_real >= ru(s2, s, a)?.lower.n_real);
            prop_assert!(ru(s2, s + 1, a)?.lower.n_real >= ru(s2, s, a)?.lower.n_real);
        }

        #[test]
        fn renyi_known_lower_below_upper(
            g0 in 0.05f64..1.0,
            n in 3usize..40,
            frac in 0.001f64..0.999,
            k in 1usize..5,
            delta in 0.01f64..0.5,
        ) {
            let sigma2 = 1.0 + frac * (n as f64 - 1.0);
            let b = renyi_known_bounds(g0, sigma2, n, k, delta).unwrap();
            prop_assert!(b.lower.n_real <= b.upper.n_real * (1.0 + 1e-12));
            prop_assert!(!b.lower.flags.iter().any(|f| f == "lower_exceeds_upper"));
        }
    }
}
