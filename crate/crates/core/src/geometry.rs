//! Simplex constructions relating TV and 2-Rényi thresholds.
//!
//! Two representatives are used. The uniform point, and the vertex
//! representative `(1/σ₂, r, …, r)` with `r = (σ₂-1)/(σ₂(n-1))`, which sits at
//! `D₂(e₁‖·) = σ₂` from the first vertex. Each family below is a one-parameter
//! curve through such a representative, cut at `D₂ = σ₂`:
//!
//! | family | representative | TV at the cut |
//! |--------|----------------|---------------|
//! | [`lemma4_family`] | uniform | `√((n-1)(σ₂-1))/n` |
//! | [`lemma5_family`] | vertex rep | `(σ₂-1)/σ₂` |
//! | [`lemma6_family`] | vertex rep | `(σ₂-1)√(n-2)/(√σ₂ (n-1))` |
//!
//! These are identities of the families. They are not global extrema of TV
//! over the Rényi sphere: at `n = 4, σ₂ = 2` the point `(½, ½, 0, 0)` is on the
//! sphere around uniform with TV `½ > √3/4`. [`tv_extrema_oracle`] searches the
//! sphere independently and [`certificate`] records how the two compare.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{renyi2, total_variation};
use crate::rng::RngSeed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma5Branch {
    Vertex,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "arg")]
pub enum PointLabel {
    Uniform,
    Vertex(usize),
    Lemma4(Sign),
    VertexRep,
    Lemma5(Lemma5Branch),
    Lemma6(Sign),
    Free,
}

/// A labelled probability vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexPoint {
    pub values: Vec<f64>,
    pub label: PointLabel,
}

impl SimplexPoint {
    fn checked(values: Vec<f64>, label: PointLabel) -> Result<Self> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::Infeasible(format!(
                "{label:?}: coordinate {} = {v:e} is negative",
                i + 1
            )));
        }
        Ok(SimplexPoint { values, label })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointKind {
    Uniform,
    /// 1-based vertex index.
    Vertex(usize),
    /// Flat-Dirichlet draw.
    Random(RngSeed),
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidArgument(format!("n must be >= {min}, got {n}")));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 1.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must exceed 1, got {sigma2}"
        )));
    }
    Ok(())
}

pub fn make_point(n: usize, which: PointKind) -> Result<SimplexPoint> {
    check_n(n, 2)?;
    match which {
        PointKind::Uniform => Ok(SimplexPoint {
            values: vec![1.0 / n as f64; n],
            label: PointLabel::Uniform,
        }),
        PointKind::Vertex(i) => {
            if i == 0 || i > n {
                return Err(Error::InvalidArgument(format!("vertex {i} out of range 1..={n}")));
            }
            let mut values = vec![0.0; n];
            values[i - 1] = 1.0;
            Ok(SimplexPoint {
                values,
                label: PointLabel::Vertex(i),
            })
        }
        PointKind::Random(seed) => {
            let mut rng = seed.rng();
            Ok(SimplexPoint {
                values: random_simplex(&mut rng, n),
                label: PointLabel::Free,
            })
        }
    }
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Point on the segment from uniform towards vertex 1 at `D₂(·‖uniform) = σ₂`.
pub fn lemma4_family(n: usize, sigma2: f64, sign: Sign) -> Result<SimplexPoint> {
    check_n(n, 2)?;
    check_sigma2(sigma2)?;
    let nf = n as f64;
    let first = (1.0 + sign.factor() * ((nf - 1.0) * (sigma2 - 1.0)).sqrt()) / nf;
    if first > 1.0 {
        return Err(Error::Infeasible(format!(
            "{sign:?} branch needs sigma2 <= n = {n}: coordinate 1 = {first} > 1, so coordinates 2..{n} go negative"
        )));
    }
    if first < 0.0 {
        return Err(Error::Infeasible(format!(
            "{sign:?} branch: coordinate 1 = {first} is negative"
        )));
    }
    let rest = (1.0 - first) / (nf - 1.0);
    let mut values = vec![rest.max(0.0); n];
    values[0] = first;
    SimplexPoint::checked(values, PointLabel::Lemma4(sign))
}

/// `(1/σ₂, r, …, r)` with `r = (σ₂-1)/(σ₂(n-1))`.
pub fn vertex_rep(n: usize, sigma2: f64) -> Result<SimplexPoint> {
    check_n(n, 2)?;
    check_sigma2(sigma2)?;
    let rest = (sigma2 - 1.0) / (sigma2 * (n as f64 - 1.0));
    let mut values = vec![rest; n];
    values[0] = 1.0 / sigma2;
    Ok(SimplexPoint {
        values,
        label: PointLabel::VertexRep,
    })
}

/// Points at `D₂(·‖vertex_rep) = σ₂` with coordinates `2..n` equal.
pub fn lemma5_family(n: usize, sigma2: f64, branch: Lemma5Branch) -> Result<SimplexPoint> {
    check_n(n, 2)?;
    check_sigma2(sigma2)?;
    let nf = n as f64;
    let values = match branch {
        Lemma5Branch::Vertex => {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            v
        }
        Lemma5Branch::Interior => {
            let first = (2.0 - sigma2) / sigma2;
            if first < 0.0 {
                return Err(Error::Infeasible(format!(
                    "interior branch needs sigma2 <= 2: coordinate 1 = {first}"
                )));
            }
            let mut v = vec![2.0 * (sigma2 - 1.0) / (sigma2 * (nf - 1.0)); n];
            v[0] = first;
            v
        }
    };
    SimplexPoint::checked(values, PointLabel::Lemma5(branch))
}

/// Points at `D₂(·‖vertex_rep) = σ₂` with coordinate 1 fixed at `1/σ₂`,
/// moving towards vertex 2 with coordinates `3..n` equal.
pub fn lemma6_family(n: usize, sigma2: f64, sign: Sign) -> Result<SimplexPoint> {
    check_n(n, 3)?;
    check_sigma2(sigma2)?;
    let (nf, m) = (n as f64, n as f64 - 2.0);
    let numer = 1.0 / m + sign.factor() * (sigma2 / m).sqrt();
    let denom = sigma2 * (nf - 1.0) / ((sigma2 - 1.0) * m);
    let second = numer / denom;
    let first = 1.0 / sigma2;
    let rest = (1.0 - first - second) / m;
    let mut values = vec![rest; n];
    values[0] = first;
    values[1] = second;
    // Exact zeros stay zero; anything below -1e-15 is a genuine sign failure.
    if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v < -1e-15) {
        return Err(Error::Infeasible(format!(
            "{sign:?} branch at n = {n}, sigma2 = {sigma2}: coordinate {} = {v} is negative",
            i + 1
        )));
    }
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(SimplexPoint {
        values,
        label: PointLabel::Lemma6(sign),
    })
}

/// The three published TV values for a Rényi threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedFormTv {
    /// `√((n-1)(σ₂-1))/n`.
    pub max_tv: f64,
    /// `(σ₂-1)/σ₂`.
    pub loosest_tv: f64,
    /// `(σ₂-1)√(n-2)/(√σ₂ (n-1))`.
    pub min_tv: f64,
}

pub fn closed_form_tv(n: usize, sigma2: f64) -> Result<ClosedFormTv> {
    check_n(n, 3)?;
    check_sigma2(sigma2)?;
    let nf = n as f64;
    Ok(ClosedFormTv {
        max_tv: ((nf - 1.0) * (sigma2 - 1.0)).sqrt() / nf,
        loosest_tv: (sigma2 - 1.0) / sigma2,
        min_tv: (sigma2 - 1.0) * (nf - 2.0).sqrt() / (sigma2.sqrt() * (nf - 1.0)),
    })
}

// =============================================================================
// Brute-force oracle
// =============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub restarts: usize,
    pub iterations: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            restarts: 64,
            iterations: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub tv_min: f64,
    pub tv_max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    /// Largest `|D₂(x‖rep) - σ₂|` among the returned points.
    pub max_residual: f64,
    pub grid_used: bool,
}

/// Grid resolution of the exhaustive scan for `n <= 4`.
const GRID_RESOLUTION: usize = 200;
const SPHERE_TOL: f64 = 1e-6;

/// Where the ray from `rep` along `dir` (Σ dir = 0) meets `D₂(·‖rep) = σ₂`.
///
/// Along the ray `D₂(rep + t·dir ‖ rep) = 1 + t² Σ dir²/rep`, so the crossing is
/// at `t = √((σ₂-1) / Σ dir²/rep)`. Returns `None` if it leaves the simplex.
fn sphere_point(rep: &[f64], dir: &[f64], sigma2: f64) -> Option<(Vec<f64>, f64)> {
    let chi2: f64 = dir.iter().zip(rep).map(|(d, r)| d * d / r).sum();
    if !(chi2 > 0.0) {
        return None;
    }
    let t = ((sigma2 - 1.0) / chi2).sqrt();
    let mut x = Vec::with_capacity(rep.len());
    for (r, d) in rep.iter().zip(dir) {
        let v = r + t * d;
        if v < -1e-12 {
            return None;
        }
        x.push(v.max(0.0));
    }
    let tv = 0.5 * t * dir.iter().map(|d| d.abs()).sum::<f64>();
    Some((x, tv))
}

/// Same crossing for a ray from an arbitrary `center` with `D₂(center‖rep) < σ₂`.
/// `D₂(center + t·dir)` is quadratic in `t`; the positive root is taken.
fn sphere_point_from(center: &[f64], rep: &[f64], dir: &[f64], sigma2: f64) -> Option<(Vec<f64>, f64)> {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for ((x, d), r) in center.iter().zip(dir).zip(rep) {
        a += d * d / r;
        b += x * d / r;
        c += x * x / r;
    }
    if !(a > 0.0) || c >= sigma2 {
        return None;
    }
    let t = (-b + (b * b - a * (c - sigma2)).sqrt()) / a;
    let mut x = Vec::with_capacity(rep.len());
    for (x0, d) in center.iter().zip(dir) {
        let v = x0 + t * d;
        if v < -1e-12 {
            return None;
        }
        x.push(v.max(0.0));
    }
    let tv = 0.5 * x.iter().zip(rep).map(|(p, q)| (p - q).abs()).sum::<f64>();
    Some((x, tv))
}

/// Removes the mean over `support`; coordinates outside it are zeroed.
fn project_face(v: &mut [f64], support: &[bool]) {
    let k = support.iter().filter(|&&s| s).count() as f64;
    let mean = v
        .iter()
        .zip(support)
        .filter(|(_, &s)| s)
        .map(|(x, _)| x)
        .sum::<f64>()
        / k;
    for (x, &s) in v.iter_mut().zip(support) {
        *x = if s { *x - mean } else { 0.0 };
    }
}

#[derive(Clone)]
struct Extremes {
    min: Option<(f64, Vec<f64>)>,
    max: Option<(f64, Vec<f64>)>,
}

impl Extremes {
    fn empty() -> Self {
        Extremes { min: None, max: None }
    }

    fn offer(&mut self, tv: f64, x: &[f64]) {
        if self.min.as_ref().is_none_or(|(m, _)| tv < *m) {
            self.min = Some((tv, x.to_vec()));
        }
        if self.max.as_ref().is_none_or(|(m, _)| tv > *m) {
            self.max = Some((tv, x.to_vec()));
        }
    }

    fn merge(mut self, other: Extremes) -> Extremes {
        if let Some((tv, x)) = other.min {
            if self.min.as_ref().is_none_or(|(m, _)| tv < *m) {
                self.min = Some((tv, x));
            }
        }
        if let Some((tv, x)) = other.max {
            if self.max.as_ref().is_none_or(|(m, _)| tv > *m) {
                self.max = Some((tv, x));
            }
        }
        self
    }
}

/// Random-perturbation climb over ray directions inside one face, maximising
/// `sense * TV`. The step shrinks after repeated failures.
#[allow(clippy::too_many_arguments)]
fn climb(
    center: &[f64],
    rep: &[f64],
    support: &[bool],
    sigma2: f64,
    start: Vec<f64>,
    sense: f64,
    iterations: usize,
    rng: &mut impl Rng,
) -> Option<(f64, Vec<f64>)> {
    let n = rep.len();
    let mut dir = start;
    let (mut best_x, mut best_tv) = sphere_point_from(center, rep, &dir, sigma2)?;
    let scale = dir.iter().map(|d| d.abs()).sum::<f64>().max(1e-12);
    let mut step = 0.3;
    let mut stalls = 0;
    let mut trial = vec![0.0; n];
    for _ in 0..iterations {
        for (i, t) in trial.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *t = dir[i] + step * scale * z;
        }
        project_face(&mut trial, support);
        if let Some((x, tv)) = sphere_point_from(center, rep, &trial, sigma2) {
            if sense * tv > sense * best_tv {
                best_tv = tv;
                best_x = x;
                dir.copy_from_slice(&trial);
                stalls = 0;
                continue;
            }
        }
        stalls += 1;
        if stalls > 30 {
            step *= 0.5;
            stalls = 0;
            if step < 1e-10 {
                step = 0.3;
            }
        }
    }
    Some((best_tv, best_x))
}

fn grid_scan(rep: &[f64], sigma2: f64) -> Extremes {
    let n = rep.len();
    let res = GRID_RESOLUTION;
    // Enumerate compositions of `res` into n parts; each gives a direction g - rep.
    #[allow(clippy::too_many_arguments)]
    fn rec(
        prefix: &mut Vec<usize>,
        remaining: usize,
        n: usize,
        res: usize,
        rep: &[f64],
        sigma2: f64,
        acc: &mut Extremes,
        dir: &mut Vec<f64>,
    ) {
        if prefix.len() == n - 1 {
            prefix.push(remaining);
            for (i, (&k, &r)) in prefix.iter().zip(rep).enumerate() {
                dir[i] = k as f64 / res as f64 - r;
            }
            if let Some((x, tv)) = sphere_point(rep, dir, sigma2) {
                acc.offer(tv, &x);
            }
            prefix.pop();
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(prefix, remaining - k, n, res, rep, sigma2, acc, dir);
            prefix.pop();
        }
    }
    (0..=res)
        .into_par_iter()
        .map(|first| {
            let mut acc = Extremes::empty();
            let mut prefix = vec![first];
            let mut dir = vec![0.0; n];
            if n == 1 {
                return acc;
            }
            rec(&mut prefix, res - first, n, res, rep, sigma2, &mut acc, &mut dir);
            acc
        })
        .reduce(Extremes::empty, Extremes::merge)
}

/// Brute-force min and max of `TV(x, rep)` over `{x : D₂(x‖rep) = σ₂}`.
///
/// Every candidate is placed exactly on the constraint surface by moving along a
/// ray from a center inside it. Restart 0 climbs over ray directions from `rep`
/// across the whole simplex; every other restart picks a random face and climbs
/// from the face's renormalised `rep`, so extrema on the boundary are reached
/// exactly. For `n <= 4` an exhaustive scan of grid directions at resolution
/// 1/200 is added.
pub fn tv_extrema_oracle(
    rep: &SimplexPoint,
    sigma2: f64,
    budget: OracleBudget,
    seed: u64,
) -> Result<OracleResult> {
    check_sigma2(sigma2)?;
    let rep = &rep.values;
    let n = rep.len();
    check_n(n, 2)?;
    if let Some(i) = rep.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "representative must be strictly positive; coordinate {} is {}",
            i + 1,
            rep[i]
        )));
    }

    let base = RngSeed::new(seed, 0);
    let searched = (0..budget.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = base.with_stream(restart as u64).rng();
            let mut acc = Extremes::empty();
            // Restart 0 searches the full simplex; the others a random face.
            let support: Vec<bool> = if restart == 0 {
                vec![true; n]
            } else {
                let k = rng.random_range(2..=n);
                let chosen = rand::seq::index::sample(&mut rng, n, k);
                let mut s = vec![false; n];
                chosen.iter().for_each(|i| s[i] = true);
                s
            };
            // Face center: rep restricted to the face, renormalised.
            let mass: f64 = rep.iter().zip(&support).filter(|(_, &s)| s).map(|(r, _)| r).sum();
            let center: Vec<f64> = rep
                .iter()
                .zip(&support)
                .map(|(r, &s)| if s { r / mass } else { 0.0 })
                .collect();
            let target: Vec<f64> = {
                let mut t = random_simplex(&mut rng, n);
                for (v, &s) in t.iter_mut().zip(&support) {
                    if !s {
                        *v = 0.0;
                    }
                }
                let total: f64 = t.iter().sum();
                t.iter_mut().for_each(|v| *v /= total);
                t
            };
            let mut dir: Vec<f64> = target.iter().zip(&center).map(|(x, c)| x - c).collect();
            project_face(&mut dir, &support);
            for sense in [1.0, -1.0] {
                if let Some((tv, x)) = climb(
                    &center,
                    rep,
                    &support,
                    sigma2,
                    dir.clone(),
                    sense,
                    budget.iterations,
                    &mut rng,
                ) {
                    acc.offer(tv, &x);
                }
            }
            acc
        })
        .reduce(Extremes::empty, Extremes::merge);

    let grid_used = n <= 4;
    let all = if grid_used {
        searched.merge(grid_scan(rep, sigma2))
    } else {
        searched
    };

    let (Some((tv_min, argmin)), Some((tv_max, argmax))) = (all.min, all.max) else {
        return Err(Error::OracleNoFeasiblePoint);
    };
    let residual = |x: &[f64]| (renyi2(x, rep).map(|r| r.value()).unwrap_or(f64::INFINITY) - sigma2).abs();
    let max_residual = residual(&argmin).max(residual(&argmax));
    if max_residual > SPHERE_TOL {
        return Err(Error::OracleNoFeasiblePoint);
    }
    Ok(OracleResult {
        tv_min,
        tv_max,
        argmin,
        argmax,
        max_residual,
        grid_used,
    })
}

// =============================================================================
// Certificates
// =============================================================================

/// `D₂` residual and TV of one constructed family point against its representative.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyCheck {
    pub label: PointLabel,
    pub point: Vec<f64>,
    pub residual: f64,
    pub tv: f64,
    /// The closed-form TV this family should reproduce.
    pub expected_tv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSummary {
    /// Max TV around the uniform representative.
    pub tv_max_found: f64,
    /// Min TV around the vertex representative.
    pub tv_min_found: f64,
    pub argmax: Vec<f64>,
    pub argmin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparisons {
    pub oracle_max_ge_family_max: bool,
    pub oracle_min_le_family_min: bool,
    /// The oracle found a point with TV strictly above the uniform-family value.
    pub oracle_exceeds_max_tv: bool,
    /// The oracle found a point with TV strictly below the lemma-6 family value.
    pub oracle_below_min_tv: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryCertificate {
    pub n: usize,
    pub sigma2: f64,
    pub closed_form: ClosedFormTv,
    pub family_checks: Vec<FamilyCheck>,
    /// Family branches rejected as infeasible, with the reason.
    pub infeasible: Vec<String>,
    pub oracle: OracleSummary,
    pub comparisons: Comparisons,
}

impl GeometryCertificate {
    pub fn max_residual(&self) -> f64 {
        self.family_checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

/// Builds every feasible family point for `(n, σ₂)` with its residual and TV.
pub fn family_checks(n: usize, sigma2: f64) -> Result<(Vec<FamilyCheck>, Vec<String>)> {
    let cf = closed_form_tv(n, sigma2)?;
    let uniform = make_point(n, PointKind::Uniform)?;
    let vrep = vertex_rep(n, sigma2)?;
    let mut checks = Vec::new();
    let mut infeasible = Vec::new();

    let mut push = |point: Result<SimplexPoint>, rep: &SimplexPoint, expected_tv: f64| -> Result<()> {
        match point {
            Ok(p) => {
                let d2 = renyi2(&p.values, &rep.values)?.value();
                let tv = total_variation(&p.values, &rep.values)?;
                checks.push(FamilyCheck {
                    label: p.label,
                    residual: (d2 - sigma2).abs(),
                    tv,
                    expected_tv,
                    point: p.values,
                });
                Ok(())
            }
            Err(Error::Infeasible(msg)) => {
                infeasible.push(msg);
                Ok(())
            }
            Err(e) => Err(e),
        }
    };

    // Lemma-4 points lie on the segment towards vertex 1: the TV is the offset.
    let offset = ((n as f64 - 1.0) * (sigma2 - 1.0)).sqrt() / n as f64;
    push(lemma4_family(n, sigma2, Sign::Plus), &uniform, cf.max_tv)?;
    push(lemma4_family(n, sigma2, Sign::Minus), &uniform, offset)?;
    let vertex = make_point(n, PointKind::Vertex(1))?;
    let vertex = SimplexPoint {
        label: PointLabel::VertexRep,
        ..vertex
    };
    push(Ok(vertex), &vrep, cf.loosest_tv)?;
    push(
        lemma5_family(n, sigma2, Lemma5Branch::Vertex),
        &vrep,
        cf.loosest_tv,
    )?;
    push(
        lemma5_family(n, sigma2, Lemma5Branch::Interior),
        &vrep,
        cf.loosest_tv,
    )?;
    push(lemma6_family(n, sigma2, Sign::Plus), &vrep, cf.min_tv)?;
    push(lemma6_family(n, sigma2, Sign::Minus), &vrep, cf.min_tv)?;
    Ok((checks, infeasible))
}

pub fn certificate(n: usize, sigma2: f64, seed: u64) -> Result<GeometryCertificate> {
    certificate_with_budget(n, sigma2, seed, OracleBudget::default())
}

pub fn certificate_with_budget(
    n: usize,
    sigma2: f64,
    seed: u64,
    budget: OracleBudget,
) -> Result<GeometryCertificate> {
    check_n(n, 3)?;
    if !(sigma2 > 1.0 && sigma2 < n as f64) {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must lie in (1, n) = (1, {n}), got {sigma2}"
        )));
    }
    let closed_form = closed_form_tv(n, sigma2)?;
    let (family_checks, infeasible) = family_checks(n, sigma2)?;

    let uniform = make_point(n, PointKind::Uniform)?;
    let vrep = vertex_rep(n, sigma2)?;
    let around_uniform = tv_extrema_oracle(&uniform, sigma2, budget, seed)?;
    let around_vertex = tv_extrema_oracle(&vrep, sigma2, budget, seed.wrapping_add(1))?;

    let family_max = family_checks
        .iter()
        .filter(|c| matches!(c.label, PointLabel::Lemma4(Sign::Plus)))
        .map(|c| c.tv)
        .fold(closed_form.max_tv, f64::max);
    let family_min = family_checks
        .iter()
        .filter(|c| matches!(c.label, PointLabel::Lemma6(_)))
        .map(|c| c.tv)
        .fold(closed_form.min_tv, f64::min);

    let comparisons = Comparisons {
        oracle_max_ge_family_max: around_uniform.tv_max >= family_max - SPHERE_TOL,
        oracle_min_le_family_min: around_vertex.tv_min <= family_min + SPHERE_TOL,
        oracle_exceeds_max_tv: around_uniform.tv_max > closed_form.max_tv + SPHERE_TOL,
        oracle_below_min_tv: around_vertex.tv_min < closed_form.min_tv - SPHERE_TOL,
    };
    Ok(GeometryCertificate {
        n,
        sigma2,
        closed_form,
        family_checks,
        infeasible,
        oracle: OracleSummary {
            tv_max_found: around_uniform.tv_max,
            tv_min_found: around_vertex.tv_min,
            argmax: around_uniform.argmax,
            argmin: around_vertex.argmin,
        },
        comparisons,
    })
}
