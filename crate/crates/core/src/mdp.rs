//! Tabular controlled Markov processes, policies and exact occupancies.
//!
//! The discounted state distribution is the fixed point of
//! `d(s) = (1 - γ) μ(s) + γ Σ_{s',a'} d(s') π(a'|s') P(s|s',a')`, solved here as
//! the dense system `(I - γ Mᵀ) d = (1 - γ) μ` with `M` the policy-induced chain.
//! The state-action occupancy is then `d(s,a) = π(a|s) d(s)`.

use std::fmt;

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{linalg, Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

// =============================================================================
// File formats
// =============================================================================

/// On-disk JSON form of a CMP. Indexing is `P[s][a][s']` and `reward[s][a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpDescription {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub mu: Vec<f64>,
    #[serde(rename = "P")]
    pub transition: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

/// On-disk JSON form of a policy: `pi[s][a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub pi: Vec<Vec<f64>>,
}

/// A single broken invariant found by [`validate_cmp`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EmptySpace {
        num_states: usize,
        num_actions: usize,
    },
    Shape(String),
    TransitionRowSum {
        s: usize,
        a: usize,
        sum: f64,
    },
    NegativeTransition {
        s: usize,
        a: usize,
        next: usize,
        value: f64,
    },
    MuSum {
        sum: f64,
    },
    NegativeMu {
        s: usize,
        value: f64,
    },
    GammaOutOfRange {
        gamma: f64,
    },
    RewardOutOfRange {
        s: usize,
        a: usize,
        value: f64,
        r_max: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySpace {
                num_states,
                num_actions,
            } => write!(f, "empty space: |S| = {num_states}, |A| = {num_actions}"),
            Violation::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Violation::TransitionRowSum { s, a, sum } => {
                write!(f, "P[{s}][{a}] sums to {sum}, not 1")
            }
            Violation::NegativeTransition { s, a, next, value } => {
                write!(f, "P[{s}][{a}][{next}] = {value} is negative")
            }
            Violation::MuSum { sum } => write!(f, "mu sums to {sum}, not 1"),
            Violation::NegativeMu { s, value } => write!(f, "mu[{s}] = {value} is negative"),
            Violation::GammaOutOfRange { gamma } => {
                write!(f, "gamma out of range: {gamma} not in (0, 1)")
            }
            Violation::RewardOutOfRange { s, a, value, r_max } => {
                write!(f, "reward[{s}][{a}] = {value} outside [0, {r_max}]")
            }
        }
    }
}

/// Checks every CMP invariant and returns the violated ones (empty = valid).
pub fn validate_cmp(desc: &MdpDescription) -> Vec<Violation> {
    let mut out = Vec::new();
    let (ns, na) = (desc.num_states, desc.num_actions);
    if ns == 0 || na == 0 {
        out.push(Violation::EmptySpace {
            num_states: ns,
            num_actions: na,
        });
        return out;
    }
    if !(desc.gamma > 0.0 && desc.gamma < 1.0) {
        out.push(Violation::GammaOutOfRange { gamma: desc.gamma });
    }

    if desc.mu.len() != ns {
        out.push(Violation::Shape(format!(
            "mu has length {}, expected {ns}",
            desc.mu.len()
        )));
    } else {
        for (s, &m) in desc.mu.iter().enumerate() {
            if !(m >= 0.0) {
                out.push(Violation::NegativeMu { s, value: m });
            }
        }
        let sum: f64 = desc.mu.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            out.push(Violation::MuSum { sum });
        }
    }

    if desc.transition.len() != ns {
        out.push(Violation::Shape(format!(
            "P has {} state rows, expected {ns}",
            desc.transition.len()
        )));
    } else {
        for (s, per_action) in desc.transition.iter().enumerate() {
            if per_action.len() != na {
                out.push(Violation::Shape(format!(
                    "P[{s}] has {} actions, expected {na}",
                    per_action.len()
                )));
                continue;
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != ns {
                    out.push(Violation::Shape(format!(
                        "P[{s}][{a}] has length {}, expected {ns}",
                        row.len()
                    )));
                    continue;
                }
                for (next, &p) in row.iter().enumerate() {
                    if !(p >= 0.0) {
                        out.push(Violation::NegativeTransition { s, a, next, value: p });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(Violation::TransitionRowSum { s, a, sum });
                }
            }
        }
    }

    if let Some(reward) = &desc.reward {
        let observed_max = reward.iter().flatten().fold(0.0_f64, |acc, &r| acc.max(r));
        let r_max = desc.r_max.unwrap_or(observed_max);
        if reward.len() != ns || reward.iter().any(|row| row.len() != na) {
            out.push(Violation::Shape(format!("reward must be {ns} x {na}")));
        } else {
            for (s, row) in reward.iter().enumerate() {
                for (a, &r) in row.iter().enumerate() {
                    if !(r >= 0.0 && r <= r_max) {
                        out.push(Violation::RewardOutOfRange {
                            s,
                            a,
                            value: r,
                            r_max,
                        });
                    }
                }
            }
        }
    }
    out
}

// =============================================================================
// Cmp
// =============================================================================

/// A tabular controlled Markov process `(S, A, P, μ, γ)` with an optional
/// reward table bounded by `r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cmp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    mu: Vec<f64>,
    gamma: f64,
    reward: Option<Vec<f64>>,
    r_max: f64,
}

impl Cmp {
    /// Builds a CMP from a flattened transition tensor (`(s*|A| + a)*|S| + s'`)
    /// and an optional flattened reward table (`s*|A| + a`).
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        mu: Vec<f64>,
        gamma: f64,
        reward: Option<Vec<f64>>,
    ) -> Result<Self> {
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::DimensionMismatch(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if let Some(r) = &reward {
            if r.len() != num_states * num_actions {
                return Err(Error::DimensionMismatch(format!(
                    "reward has {} entries, expected {}",
                    r.len(),
                    num_states * num_actions
                )));
            }
        }
        let r_max = reward
            .as_ref()
            .map(|r| r.iter().fold(0.0_f64, |acc, &x| acc.max(x)))
            .unwrap_or(0.0);
        let cmp = Cmp {
            num_states,
            num_actions,
            transition,
            mu,
            gamma,
            reward,
            r_max,
        };
        let violations = validate_cmp(&cmp.to_description());
        if violations.is_empty() {
            Ok(cmp)
        } else {
            Err(Error::InvalidCmp(violations))
        }
    }

    pub fn from_description(desc: &MdpDescription) -> Result<Self> {
        let violations = validate_cmp(desc);
        if !violations.is_empty() {
            return Err(Error::InvalidCmp(violations));
        }
        let transition: Vec<f64> = desc
            .transition
            .iter()
            .flat_map(|per_action| per_action.iter().flat_map(|row| row.iter().copied()))
            .collect();
        let reward: Option<Vec<f64>> = desc
            .reward
            .as_ref()
            .map(|r| r.iter().flat_map(|row| row.iter().copied()).collect());
        let observed = reward
            .as_ref()
            .map(|r| r.iter().fold(0.0_f64, |acc, &x| acc.max(x)))
            .unwrap_or(0.0);
        Ok(Cmp {
            num_states: desc.num_states,
            num_actions: desc.num_actions,
            transition,
            mu: desc.mu.clone(),
            gamma: desc.gamma,
            reward,
            r_max: desc.r_max.unwrap_or(observed),
        })
    }

    pub fn to_description(&self) -> MdpDescription {
        let (ns, na) = (self.num_states, self.num_actions);
        let transition = (0..ns)
            .map(|s| (0..na).map(|a| self.transition_row(s, a).to_vec()).collect())
            .collect();
        let reward = self
            .reward
            .as_ref()
            .map(|r| r.chunks(na).map(|row| row.to_vec()).collect());
        MdpDescription {
            num_states: ns,
            num_actions: na,
            gamma: self.gamma,
            mu: self.mu.clone(),
            transition,
            r_max: self.reward.as_ref().map(|_| self.r_max),
            reward,
        }
    }

    /// Same process with a different transition tensor (e.g. an estimate).
    pub fn with_transition(&self, transition: Vec<f64>) -> Result<Self> {
        let mut out = Cmp::new(
            self.num_states,
            self.num_actions,
            transition,
            self.mu.clone(),
            self.gamma,
            self.reward.clone(),
        )?;
        out.r_max = self.r_max;
        Ok(out)
    }

    /// Same process with a different initial distribution.
    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        let mut out = Cmp::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            mu,
            self.gamma,
            self.reward.clone(),
        )?;
        out.r_max = self.r_max;
        Ok(out)
    }

    /// Attaches a reward table with an explicit bound `r_max`.
    pub fn with_reward(&self, reward: Vec<f64>, r_max: f64) -> Result<Self> {
        let mut out = Cmp::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            self.mu.clone(),
            self.gamma,
            Some(reward),
        )?;
        if out.r_max > r_max {
            return Err(Error::InvalidArgument(format!(
                "r_max {r_max} below largest reward {}",
                out.r_max
            )));
        }
        out.r_max = r_max;
        Ok(out)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Flattened transition tensor.
    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// `P(·|s,a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn reward(&self) -> Option<&[f64]> {
        self.reward.as_deref()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }
}

// =============================================================================
// Policies
// =============================================================================

/// A stationary tabular policy `π(a|s)`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    num_states: usize,
    num_actions: usize,
    pi: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(num_states: usize, num_actions: usize, pi: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidPolicy("empty policy table".into()));
        }
        if pi.len() != num_states * num_actions {
            return Err(Error::InvalidPolicy(format!(
                "table has {} entries, expected {}",
                pi.len(),
                num_states * num_actions
            )));
        }
        for (s, row) in pi.chunks(num_actions).enumerate() {
            if let Some(a) = row.iter().position(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!(
                    "pi[{s}][{a}] = {} is negative",
                    row[a]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(TabularPolicy {
            num_states,
            num_actions,
            pi,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::InvalidPolicy("ragged policy rows".into()));
        }
        Self::new(rows.len(), num_actions, rows.concat())
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        TabularPolicy {
            num_states,
            num_actions,
            pi: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut pi = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!(
                    "action {a} out of range in state {s}"
                )));
            }
            pi[s * num_actions + a] = 1.0;
        }
        Self::new(actions.len(), num_actions, pi)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.pi[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.pi[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.pi
    }

    pub fn to_file(&self) -> PolicyFile {
        PolicyFile {
            pi: self.pi.chunks(self.num_actions).map(|r| r.to_vec()).collect(),
        }
    }
}

fn check_dims(c: &Cmp, p: &TabularPolicy) -> Result<()> {
    if c.num_states != p.num_states || c.num_actions != p.num_actions {
        return Err(Error::DimensionMismatch(format!(
            "CMP is {}x{}, policy is {}x{}",
            c.num_states, c.num_actions, p.num_states, p.num_actions
        )));
    }
    Ok(())
}

// =============================================================================
// Occupancy measures
// =============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupancyKind {
    /// Solved exactly from the model.
    Exact,
    /// Truncated power series (the oracle); within its tolerance of exact.
    Series,
    /// Sample frequencies `counts / N`.
    Empirical,
}

/// A distribution over state-action pairs, flattened as `s*|A| + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMeasure {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    kind: OccupancyKind,
    sample_count: u64,
}

impl OccupancyMeasure {
    /// Empirical measure from per-pair counts.
    pub fn from_counts(num_states: usize, num_actions: usize, counts: &[u64]) -> Result<Self> {
        if counts.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for {} pairs",
                counts.len(),
                num_states * num_actions
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyBatch);
        }
        let values = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(OccupancyMeasure {
            num_states,
            num_actions,
            values,
            kind: OccupancyKind::Empirical,
            sample_count: total,
        })
    }

    /// Uniform measure over all pairs (the zero-sample estimate).
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let n = num_states * num_actions;
        OccupancyMeasure {
            num_states,
            num_actions,
            values: vec![1.0 / n as f64; n],
            kind: OccupancyKind::Empirical,
            sample_count: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> OccupancyKind {
        self.kind
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    /// `d(s) = Σ_a d(s,a)`.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.values
            .chunks(self.num_actions)
            .map(|row| row.iter().sum())
            .collect()
    }
}

// =============================================================================
// Induced chain and spectral information
// =============================================================================

/// `M[s][s'] = Σ_a π(a|s) P(s'|s,a)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyInducedChain {
    n: usize,
    matrix: Vec<f64>,
}

impl PolicyInducedChain {
    /// Wraps an arbitrary row-stochastic matrix.
    pub fn from_matrix(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n}x{n} chain",
                matrix.len()
            )));
        }
        for (s, row) in matrix.chunks(n).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "chain row {s} is not a distribution"
                )));
            }
        }
        Ok(PolicyInducedChain { n, matrix })
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.matrix[s * self.n + t]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.matrix[s * self.n..(s + 1) * self.n]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

pub fn induced_chain(c: &Cmp, p: &TabularPolicy) -> Result<PolicyInducedChain> {
    check_dims(c, p)?;
    let n = c.num_states;
    let mut matrix = vec![0.0; n * n];
    for s in 0..n {
        for a in 0..c.num_actions {
            let w = p.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (t, &pt) in c.transition_row(s, a).iter().enumerate() {
                matrix[s * n + t] += w * pt;
            }
        }
    }
    Ok(PolicyInducedChain { n, matrix })
}

/// Eigen-information of an induced chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralInfo {
    /// Real part of the second-largest eigenvalue.
    pub lambda2: f64,
    pub lambda2_modulus: f64,
    /// `min{1 - λ₂, 1}`, clamped to `[0, 1]`.
    pub gamma0: f64,
    /// Detailed balance holds (eigenvalues are then real).
    pub reversible: bool,
    /// All eigenvalues as `(re, im)`, sorted by real part, descending.
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Unique stationary distribution of the chain, if the chain has one.
pub fn stationary_distribution(m: &PolicyInducedChain) -> Result<Vec<f64>> {
    let n = m.n;
    // (Mᵀ - I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = m.get(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = linalg::solve(a, b)?;
    for x in pi.iter_mut() {
        *x = x.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(pi)
}

fn detailed_balance(m: &PolicyInducedChain, pi: &[f64], tol: f64) -> bool {
    let n = m.n;
    (0..n).all(|i| (0..i).all(|j| (pi[i] * m.get(i, j) - pi[j] * m.get(j, i)).abs() <= tol))
}

pub fn spectral_gap(m: &PolicyInducedChain) -> Result<SpectralInfo> {
    let n = m.n;
    let dense = DMatrix::from_row_slice(n, n, &m.matrix);

    let symmetric = m.is_symmetric(1e-12);
    let stationary = if symmetric {
        None
    } else {
        stationary_distribution(m).ok()
    };
    let balanced = stationary
        .as_ref()
        .map(|pi| detailed_balance(m, pi, 1e-12))
        .unwrap_or(false);
    let reversible = symmetric || balanced;

    let mut eigenvalues: Vec<(f64, f64)> = if symmetric {
        let sym = (&dense + dense.transpose()) * 0.5;
        SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .map(|&x| (x, 0.0))
            .collect()
    } else if balanced && stationary.as_ref().unwrap().iter().all(|&p| p > 1e-300) {
        // D^{1/2} M D^{-1/2} is symmetric under detailed balance.
        let pi = stationary.as_ref().unwrap();
        let mut s = dense.clone();
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] *= (pi[i] / pi[j]).sqrt();
            }
        }
        let sym = (&s + s.transpose()) * 0.5;
        SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .map(|&x| (x, 0.0))
            .collect()
    } else {
        let schur = Schur::try_new(dense.clone(), 1e-14, 100_000).ok_or_else(|| {
            let asym = (&dense - dense.transpose()).abs().max();
            Error::EigenNoConvergence { residual: asym }
        })?;
        schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    };
    eigenvalues.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));

    // Drop the eigenvalue for the constant eigenvector (closest to 1).
    let unit = eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| {
            let dx = (x.1 .0 - 1.0).hypot(x.1 .1);
            let dy = (y.1 .0 - 1.0).hypot(y.1 .1);
            dx.total_cmp(&dy)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let second = eigenvalues
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != unit)
        .map(|(_, &z)| z)
        .next();

    let (lambda2, lambda2_modulus) = match second {
        Some((re, im)) => (re, re.hypot(im)),
        // A single state mixes immediately.
        None => (0.0, 0.0),
    };
    let gamma0 = (1.0 - lambda2).clamp(0.0, 1.0);
    Ok(SpectralInfo {
        lambda2,
        lambda2_modulus,
        gamma0,
        reversible,
        eigenvalues,
    })
}

// =============================================================================
// Occupancy computation
// =============================================================================

/// Exact discounted state-action occupancy via a dense linear solve.
pub fn occupancy(c: &Cmp, p: &TabularPolicy) -> Result<OccupancyMeasure> {
    let chain = induced_chain(c, p)?;
    let n = c.num_states;
    let g = c.gamma;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i == j { 1.0 } else { 0.0 } - g * chain.get(j, i);
        }
    }
    let b: Vec<f64> = c.mu.iter().map(|&m| (1.0 - g) * m).collect();
    let d_state = linalg::solve(a, b)?;

    let na = c.num_actions;
    let mut values = vec![0.0; n * na];
    for s in 0..n {
        let ds = d_state[s].max(0.0);
        for a in 0..na {
            values[s * na + a] = p.prob(s, a) * ds;
        }
    }
    Ok(OccupancyMeasure {
        num_states: n,
        num_actions: na,
        values,
        kind: OccupancyKind::Exact,
        sample_count: 0,
    })
}

/// Smallest horizon `T` with `γ^{T+1} / (1 - γ) < tol`.
pub fn oracle_horizon(gamma: f64, tol: f64) -> usize {
    let mut t = 0usize;
    let mut tail = gamma / (1.0 - gamma);
    while tail >= tol {
        tail *= gamma;
        t += 1;
    }
    t
}

/// Brute-force occupancy: truncated series `(1 - γ) Σ_{t≤T} γᵗ Pr(s_t, a_t)`.
pub fn occupancy_oracle(c: &Cmp, p: &TabularPolicy, tol: f64) -> Result<OccupancyMeasure> {
    check_dims(c, p)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let (ns, na) = (c.num_states, c.num_actions);
    let horizon = oracle_horizon(c.gamma, tol);
    let mut values = vec![0.0; ns * na];
    let mut state_dist = c.mu.clone();
    let mut weight = 1.0 - c.gamma;
    for _ in 0..=horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if state_dist[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                let joint = state_dist[s] * p.prob(s, a);
                values[s * na + a] += weight * joint;
                if joint == 0.0 {
                    continue;
                }
                for (t, &pt) in c.transition_row(s, a).iter().enumerate() {
                    next[t] += joint * pt;
                }
            }
        }
        state_dist = next;
        weight *= c.gamma;
    }
    Ok(OccupancyMeasure {
        num_states: ns,
        num_actions: na,
        values,
        kind: OccupancyKind::Series,
        sample_count: 0,
    })
}

// =============================================================================
// Returns
// =============================================================================

/// `J = (1/(1-γ)) Σ d(s,a) R(s,a)`.
pub fn exact_return(c: &Cmp, p: &TabularPolicy) -> Result<f64> {
    let reward = c.reward.as_ref().ok_or(Error::MissingReward)?;
    let d = occupancy(c, p)?;
    let total: f64 = d.values.iter().zip(reward).map(|(x, r)| x * r).sum();
    Ok(total / (1.0 - c.gamma))
}

/// Monte Carlo estimate `Ĵ = (1/((1-γ)N)) Σ R(s_n, a_n)`.
pub fn mc_return(samples: &[(usize, usize)], c: &Cmp) -> Result<f64> {
    let reward = c.reward.as_ref().ok_or(Error::MissingReward)?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for &(s, a) in samples {
        if s >= c.num_states || a >= c.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "sample ({s}, {a}) out of range"
            )));
        }
        total += reward[s * c.num_actions + a];
    }
    Ok(total / ((1.0 - c.gamma) * samples.len() as f64))
}
