//! Monte Carlo audits of the concentration budgets and the geometry audit.
//!
//! A concentration experiment fixes one CMP and one policy, asks the planner
//! for `N`, and then repeats "sample, estimate, measure" `replicates` times,
//! counting how often the measured divergence exceeds the threshold. Each
//! budget phase `p` and replicate `r` draw from `RngSeed::new(phase_seed(p), r)`
//! so results are identical whether replicates run serially or in parallel.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::{random_policies, Metric};
use crate::divergence::{renyi2, total_variation};
use crate::geometry::{certificate_with_budget, GeometryCertificate, OracleBudget};
use crate::harness::generator::{generate_random_mdp, GeneratorConfig};
use crate::harness::io::{load_cmp, load_policy, read_json};
use crate::mdp::{induced_chain, occupancy, spectral_gap, Cmp, OccupancyMeasure, TabularPolicy};
use crate::planner::{
    renyi_known_bounds, renyi_unknown_bounds, threshold_meaningful, tv_known_single, tv_unknown,
    SampleBudget, Threshold, ThresholdReport, UnknownScope,
};
use crate::rng::RngSeed;
use crate::sampling::{estimate_transition_model, occupancy_on_estimate, sample_occupancy, SamplingMode};
use crate::{Error, Result};

// =============================================================================
// Configuration
// =============================================================================

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    File(PathBuf),
    Generator(GeneratorConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    Uniform,
    File(PathBuf),
    /// Flat-Dirichlet rows drawn from this seed.
    Random(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    KnownModel,
    UnknownModel,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<PathBuf>,
}

fn default_k() -> usize {
    1
}
fn default_cap() -> u64 {
    100_000
}
fn default_max_samples() -> u64 {
    50_000_000
}
fn default_mode() -> SamplingMode {
    SamplingMode::Geometric
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    pub policy: PolicySource,
    pub setting: Setting,
    pub metric: Metric,
    pub threshold: f64,
    pub delta: f64,
    pub replicates: usize,
    pub master_seed: u64,
    /// `K` in the known-model Rényi budget.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Generative-model draws per pair never exceed this; capping is flagged.
    #[serde(default = "default_cap")]
    pub per_pair_cap: u64,
    /// Known-model runs refuse budgets larger than this.
    #[serde(default = "default_max_samples")]
    pub max_samples: u64,
    #[serde(default = "default_mode")]
    pub sampling_mode: SamplingMode,
    #[serde(default)]
    pub output: OutputPaths,
    /// Record wall-clock time per replicate. Off by default so that output
    /// files are byte-identical across runs.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    /// Reads a JSON config; relative file sources resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let MdpSource::File(p) = &mut cfg.mdp {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let PolicySource::File(p) = &mut cfg.policy {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        let ok = match self.metric {
            Metric::Tv => self.threshold > 0.0 && self.threshold <= 1.0,
            Metric::Renyi2 => self.threshold > 1.0 && self.threshold.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "threshold {} is outside the range of {:?}",
                self.threshold, self.metric
            )));
        }
        if self.k == 0 || self.per_pair_cap == 0 {
            return Err(Error::InvalidArgument(
                "k and per_pair_cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn load_mdp(&self) -> Result<Cmp> {
        match &self.mdp {
            MdpSource::File(p) => load_cmp(p),
            MdpSource::Generator(g) => generate_random_mdp(g),
        }
    }

    pub fn load_policy(&self, c: &Cmp) -> Result<TabularPolicy> {
        let p = match &self.policy {
            PolicySource::Uniform => TabularPolicy::uniform(c.num_states(), c.num_actions()),
            PolicySource::File(path) => load_policy(path)?,
            PolicySource::Random(seed) => {
                random_policies(c.num_states(), c.num_actions(), 1, *seed)?.remove(0)
            }
        };
        if p.num_states() != c.num_states() || p.num_actions() != c.num_actions() {
            return Err(Error::DimensionMismatch(
                "policy shape does not match the MDP".into(),
            ));
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

// =============================================================================
// Records and reports
// =============================================================================

/// One replicate of one budget phase.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub replicate: usize,
    pub n_used: u64,
    pub formula_id: String,
    pub divergence: f64,
    pub threshold: f64,
    pub violated: bool,
    pub env_steps: u64,
    pub wall_ms: f64,
}

pub const RUN_RECORD_HEADER: [&str; 8] = [
    "replicate",
    "n_used",
    "formula_id",
    "divergence",
    "threshold",
    "violated",
    "env_steps",
    "wall_ms",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub formula_id: String,
    /// Samples (known model) or generative draws per pair (unknown model).
    pub n_used: u64,
    pub budget: Option<SampleBudget>,
    pub seed: u64,
    pub violations: usize,
    pub violation_rate: f64,
    pub mean_divergence: f64,
    pub max_divergence: f64,
    /// Geometric mode only: mean trajectory length per emitted sample.
    pub mean_steps_per_sample: Option<f64>,
    pub steps_per_sample_stderr: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub config: ExperimentConfig,
    pub num_pairs: usize,
    pub gamma: f64,
    pub gamma0: Option<f64>,
    pub reversible_chain: Option<bool>,
    pub threshold_report: ThresholdReport,
    pub zero_sample_shortcut: bool,
    pub phases: Vec<PhaseSummary>,
    /// Worst phase.
    pub violation_rate: f64,
    pub passed: bool,
    pub flags: Vec<String>,
    /// Phase-major, replicate-minor. Written to CSV, not to the summary.
    #[serde(skip)]
    pub records: Vec<RunRecord>,
}

/// Seed of budget phase `p`; phase 0 uses the master seed itself.
pub fn phase_seed(master_seed: u64, phase: usize) -> u64 {
    master_seed.wrapping_add((phase as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// =============================================================================
// Concentration experiment
// =============================================================================

struct Phase {
    formula_id: String,
    n_used: u64,
    budget: Option<SampleBudget>,
    flags: Vec<String>,
}

pub fn run_concentration_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ConcentrationReport> {
    cfg.validate()?;
    let c = cfg.load_mdp()?;
    let policy = cfg.load_policy(&c)?;
    let d = occupancy(&c, &policy)?;
    let n_pairs = c.num_pairs();
    let threshold = match cfg.metric {
        Metric::Tv => Threshold::Tv(cfg.threshold),
        Metric::Renyi2 => Threshold::Renyi2(cfg.threshold),
    };
    let threshold_report = threshold_meaningful(n_pairs, threshold)?;
    let mut flags = Vec::new();
    let mut gamma0 = None;
    let mut reversible_chain = None;

    if !threshold_report.meaningful {
        return Ok(zero_sample_report(cfg, &c, &d, threshold_report));
    }

    if cfg.setting == Setting::KnownModel {
        let info = spectral_gap(&induced_chain(&c, &policy)?)?;
        if info.gamma0 <= 0.0 {
            return Err(Error::NoMixing);
        }
        if !info.reversible {
            flags.push("non_reversible_chain".to_string());
        }
        gamma0 = Some(info.gamma0);
        reversible_chain = Some(info.reversible);
    }

    let phases = plan_phases(cfg, &c, gamma0)?;
    let mut summaries = Vec::with_capacity(phases.len());
    let mut records = Vec::new();
    for (idx, phase) in phases.into_iter().enumerate() {
        let seed = phase_seed(cfg.master_seed, idx);
        let run = |r: usize| run_replicate(cfg, &c, &policy, &d, &phase, RngSeed::new(seed, r as u64), r);
        let phase_records: Vec<RunRecord> = match exec {
            Execution::Serial => (0..cfg.replicates).map(run).collect::<Result<_>>()?,
            Execution::Parallel => (0..cfg.replicates)
                .into_par_iter()
                .map(run)
                .collect::<Result<_>>()?,
        };
        summaries.push(summarize(cfg, &phase, seed, &phase_records));
        records.extend(phase_records);
    }

    let violation_rate = summaries.iter().map(|s| s.violation_rate).fold(0.0, f64::max);
    Ok(ConcentrationReport {
        config: cfg.clone(),
        num_pairs: n_pairs,
        gamma: c.gamma(),
        gamma0,
        reversible_chain,
        threshold_report,
        zero_sample_shortcut: false,
        phases: summaries,
        violation_rate,
        passed: violation_rate <= cfg.delta,
        flags,
        records,
    })
}

fn plan_phases(cfg: &ExperimentConfig, c: &Cmp, gamma0: Option<f64>) -> Result<Vec<Phase>> {
    let (ns, na) = (c.num_states(), c.num_actions());
    let budgets: Vec<SampleBudget> = match (cfg.setting, cfg.metric) {
        (Setting::KnownModel, Metric::Tv) => {
            vec![tv_known_single(gamma0.unwrap_or(1.0), cfg.threshold, cfg.delta)?]
        }
        (Setting::KnownModel, Metric::Renyi2) => {
            let b = renyi_known_bounds(gamma0.unwrap_or(1.0), cfg.threshold, ns * na, cfg.k, cfg.delta)?;
            vec![b.lower, b.upper]
        }
        (Setting::UnknownModel, Metric::Tv) => {
            vec![tv_unknown(
                c.gamma(),
                ns,
                na,
                cfg.threshold,
                cfg.delta,
                UnknownScope::PerPair,
            )?]
        }
        (Setting::UnknownModel, Metric::Renyi2) => {
            let b = renyi_unknown_bounds(c.gamma(), ns, na, cfg.threshold, cfg.delta)?;
            vec![b.lower, b.upper]
        }
    };

    budgets
        .into_iter()
        .map(|b| {
            let mut flags = Vec::new();
            let n_used = match cfg.setting {
                Setting::KnownModel => {
                    if b.n_int > cfg.max_samples {
                        return Err(Error::InvalidArgument(format!(
                            "{} asks for {} samples, above max_samples = {}",
                            b.formula_id, b.n_int, cfg.max_samples
                        )));
                    }
                    b.n_int
                }
                Setting::UnknownModel => {
                    // Rényi totals are spread evenly over the pairs.
                    let per_pair = if matches!(cfg.metric, Metric::Renyi2) {
                        (b.n_real / (ns * na) as f64).ceil().max(1.0)
                    } else {
                        b.n_int as f64
                    };
                    if per_pair > cfg.per_pair_cap as f64 {
                        flags.push(format!("per_pair_capped_from_{per_pair}"));
                        cfg.per_pair_cap
                    } else {
                        per_pair as u64
                    }
                }
            };
            Ok(Phase {
                formula_id: b.formula_id.to_string(),
                n_used,
                flags,
                budget: Some(b),
            })
        })
        .collect()
}

fn run_replicate(
    cfg: &ExperimentConfig,
    c: &Cmp,
    policy: &TabularPolicy,
    d: &OccupancyMeasure,
    phase: &Phase,
    seed: RngSeed,
    replicate: usize,
) -> Result<RunRecord> {
    let start = Instant::now();
    let (d_hat, env_steps) = match cfg.setting {
        Setting::KnownModel => {
            let s = sample_occupancy(c, policy, phase.n_used as usize, seed, cfg.sampling_mode)?;
            (s.empirical, s.env_steps)
        }
        Setting::UnknownModel => {
            let e = estimate_transition_model(c, phase.n_used, seed)?;
            (occupancy_on_estimate(&e, policy)?, e.total_draws())
        }
    };
    let divergence = measure(cfg.metric, d_hat.values(), d.values())?;
    let wall_ms = if cfg.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(RunRecord {
        replicate,
        n_used: phase.n_used,
        formula_id: phase.formula_id.clone(),
        divergence,
        threshold: cfg.threshold,
        violated: divergence > cfg.threshold,
        env_steps,
        wall_ms,
    })
}

/// `D(d̂ ‖ d)`; a Rényi support violation counts as `+∞`.
fn measure(metric: Metric, d_hat: &[f64], d: &[f64]) -> Result<f64> {
    match metric {
        Metric::Tv => total_variation(d_hat, d),
        Metric::Renyi2 => Ok(renyi2(d_hat, d)?.value()),
    }
}

fn summarize(cfg: &ExperimentConfig, phase: &Phase, seed: u64, records: &[RunRecord]) -> PhaseSummary {
    let violations = records.iter().filter(|r| r.violated).count();
    let reps = records.len().max(1) as f64;
    let geometric = cfg.setting == Setting::KnownModel && cfg.sampling_mode == SamplingMode::Geometric;
    let (mean_steps, stderr) = if geometric && phase.n_used > 0 {
        let per: Vec<f64> = records
            .iter()
            .map(|r| r.env_steps as f64 / r.n_used as f64)
            .collect();
        let mean = per.iter().sum::<f64>() / reps;
        let var = if per.len() > 1 {
            per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1.0)
        } else {
            0.0
        };
        (Some(mean), Some((var / reps).sqrt()))
    } else {
        (None, None)
    };
    PhaseSummary {
        formula_id: phase.formula_id.clone(),
        n_used: phase.n_used,
        budget: phase.budget.clone(),
        seed,
        violations,
        violation_rate: violations as f64 / reps,
        mean_divergence: records.iter().map(|r| r.divergence).sum::<f64>() / reps,
        max_divergence: records
            .iter()
            .map(|r| r.divergence)
            .fold(f64::NEG_INFINITY, f64::max),
        mean_steps_per_sample: mean_steps,
        steps_per_sample_stderr: stderr,
        flags: phase.flags.clone(),
    }
}

/// A threshold no distribution can exceed needs no samples: `d̂` is the
/// uniform measure and the divergence is measured in the direction in which
/// the limit holds (`D₂(d ‖ uniform)`, `TV(uniform, d)`).
fn zero_sample_report(
    cfg: &ExperimentConfig,
    c: &Cmp,
    d: &OccupancyMeasure,
    threshold_report: ThresholdReport,
) -> ConcentrationReport {
    let uniform = OccupancyMeasure::uniform(c.num_states(), c.num_actions());
    let divergence = match cfg.metric {
        Metric::Tv => total_variation(uniform.values(), d.values()).unwrap_or(f64::INFINITY),
        Metric::Renyi2 => renyi2(d.values(), uniform.values())
            .map(|r| r.value())
            .unwrap_or(f64::INFINITY),
    };
    let phase = Phase {
        formula_id: "zero_sample_shortcut".to_string(),
        n_used: 0,
        budget: None,
        flags: vec!["zero_sample_shortcut".to_string()],
    };
    let records: Vec<RunRecord> = (0..cfg.replicates)
        .map(|r| RunRecord {
            replicate: r,
            n_used: 0,
            formula_id: phase.formula_id.clone(),
            divergence,
            threshold: cfg.threshold,
            violated: divergence > cfg.threshold,
            env_steps: 0,
            wall_ms: 0.0,
        })
        .collect();
    let summary = summarize(cfg, &phase, cfg.master_seed, &records);
    let violation_rate = summary.violation_rate;
    ConcentrationReport {
        config: cfg.clone(),
        num_pairs: c.num_pairs(),
        gamma: c.gamma(),
        gamma0: None,
        reversible_chain: None,
        threshold_report,
        zero_sample_shortcut: true,
        phases: vec![summary],
        violation_rate,
        passed: violation_rate <= cfg.delta,
        flags: vec!["zero_sample_shortcut".to_string()],
        records,
    }
}

// =============================================================================
// Geometry audit
// =============================================================================

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryAuditRow {
    pub n: usize,
    pub sigma2: f64,
    pub max_tv: f64,
    pub loosest_tv: f64,
    pub min_tv: f64,
    pub oracle_max: f64,
    pub oracle_min: f64,
    pub max_residual: f64,
    pub oracle_exceeds_max_tv: bool,
    pub failed: bool,
}

pub const GEOMETRY_HEADER: [&str; 10] = [
    "n",
    "sigma2",
    "max_tv",
    "loosest_tv",
    "min_tv",
    "oracle_max",
    "oracle_min",
    "max_residual",
    "oracle_exceeds_max_tv",
    "failed",
];

/// Family points are on the sphere when their residual is below this.
pub const FAMILY_TOL: f64 = 1e-10;

impl GeometryAuditRow {
    pub fn from_certificate(cert: &GeometryCertificate) -> Self {
        let failed = cert.max_residual() > FAMILY_TOL
            || cert
                .family_checks
                .iter()
                .any(|f| (f.tv - f.expected_tv).abs() > 1e-12);
        GeometryAuditRow {
            n: cert.n,
            sigma2: cert.sigma2,
            max_tv: cert.closed_form.max_tv,
            loosest_tv: cert.closed_form.loosest_tv,
            min_tv: cert.closed_form.min_tv,
            oracle_max: cert.oracle.tv_max_found,
            oracle_min: cert.oracle.tv_min_found,
            max_residual: cert.max_residual(),
            oracle_exceeds_max_tv: cert.comparisons.oracle_exceeds_max_tv,
            failed,
        }
    }
}

/// One certificate per `(n, σ₂)` pair, `n` outer. Pairs run in parallel; the
/// output order is fixed.
pub fn run_geometry_audit(
    n_list: &[usize],
    sigma2_list: &[f64],
    seed: u64,
    budget: OracleBudget,
) -> Result<Vec<(GeometryCertificate, GeometryAuditRow)>> {
    let pairs: Vec<(usize, f64)> = n_list
        .iter()
        .flat_map(|&n| sigma2_list.iter().map(move |&s| (n, s)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(n, s)| {
            let cert = certificate_with_budget(n, s, seed, budget)?;
            let row = GeometryAuditRow::from_certificate(&cert);
            Ok((cert, row))
        })
        .collect()
}
