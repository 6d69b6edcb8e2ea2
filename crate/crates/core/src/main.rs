//! `polycomp` command-line interface.
//!
//! Exit codes: 0 on success, 2 when an audit fails (violation rate above δ,
//! failed geometry row, cover not verified), 1 on usage or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use polycomp::compress::{enumerate_deterministic, random_policies, CandidateSet, Metric};
use polycomp::geometry::OracleBudget;
use polycomp::harness::io::{load_cmp, load_policy, save_cmp, write_csv, write_json};
use polycomp::harness::{
    generate_random_mdp, run_concentration_experiment, run_geometry_audit, Execution, ExperimentConfig,
    GeneratorConfig, MdpSource, PolicySource, Setting, GEOMETRY_HEADER, RUN_RECORD_HEADER,
};
use polycomp::mdp::{occupancy, Cmp, TabularPolicy};
use polycomp::planner::{
    chain_concentration_samples, renyi_known_bounds, renyi_unknown_bounds, threshold_meaningful, tv_known_k,
    tv_known_single, tv_unknown, weissman_samples, SampleBudget, Threshold, UnknownScope,
};
use polycomp::sampling::{estimate_transition_model, occupancy_on_estimate, sample_occupancy, SamplingMode};
use polycomp::{greedy_cover, renyi2, total_variation, verify_cover, Error, Renyi2, RngSeed};

const EXIT_AUDIT_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 1;
const DEFAULT_OUT_DIR: &str = "polycomp-out";

#[derive(Parser)]
#[command(
    name = "polycomp",
    version,
    about = "Sample budgets, divergences and audits for policy-space compression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Args, Clone, Debug, Default)]
struct Exec {
    /// Run replicates on one thread
    #[arg(long, conflicts_with = "threads")]
    serial: bool,
    /// Worker threads for parallel replicates
    #[arg(long)]
    threads: Option<usize>,
    /// Record per-replicate wall time (makes outputs run-dependent)
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Tv,
    Renyi2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Tv => Metric::Tv,
            MetricArg::Renyi2 => Metric::Renyi2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SettingArg {
    Known,
    Unknown,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Geometric,
    Stationary,
}

#[derive(Subcommand)]
enum Command {
    /// Print every sample-size formula for one set of inputs
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: PlanArgs,
        /// Print the JSON report instead of the table
        #[arg(long)]
        json: bool,
    },
    /// Generate a random MDP
    GenMdp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenArgs,
        /// Output file (default: <out-dir>/mdp.json, or stdout without --out-dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one occupancy estimate and report its divergences
    Estimate {
        #[command(flatten)]
        common: Common,
        /// MDP JSON file; a random MDP is generated otherwise
        #[arg(long)]
        mdp: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
        /// Policy JSON file; uniform otherwise
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "known")]
        setting: SettingArg,
        #[arg(long, value_enum, default_value = "geometric")]
        mode: ModeArg,
        /// Samples (known model) or draws per pair (unknown model)
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        /// Also write the raw samples
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Audit a TV concentration budget
    VerifyTv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: Exec,
    },
    /// Audit the Rényi budgets at both ends
    VerifyRenyi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: Exec,
    },
    /// Geometry certificates over an (n, σ₂) grid
    Geometry {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 4, 6])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.5f64, 2.0])]
        sigma2: Vec<f64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Greedy max-min cover of a candidate policy set
    Compress {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mdp: PathBuf,
        /// "enumerate-deterministic" or a number of random policies
        #[arg(long, default_value = "enumerate-deterministic")]
        candidates: String,
        #[arg(long, value_enum, default_value = "tv")]
        metric: MetricArg,
        #[arg(long)]
        sigma: f64,
    },
}

#[derive(Args, Clone, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 5)]
    states: usize,
    #[arg(long, default_value_t = 3)]
    actions: usize,
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[arg(long)]
    reversible: bool,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
}

impl GenArgs {
    fn config(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            num_states: self.states,
            num_actions: self.actions,
            branching: self.branching,
            seed,
            reversible: self.reversible,
            gamma: self.gamma,
        }
    }
}

/// Planner inputs; a `--config` file supplies defaults, flags override.
#[derive(Args, Clone, Debug, Default)]
struct PlanArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sigma_tv: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct PlanInputs {
    delta: f64,
    sigma_tv: f64,
    sigma2: f64,
    gamma: f64,
    gamma0: f64,
    states: usize,
    actions: usize,
    k: usize,
}

impl Default for PlanInputs {
    fn default() -> Self {
        PlanInputs {
            delta: 0.1,
            sigma_tv: 0.1,
            sigma2: 2.0,
            gamma: 0.9,
            gamma0: 0.5,
            states: 5,
            actions: 3,
            k: 1,
        }
    }
}

// =============================================================================
// Entry point
// =============================================================================

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_AUDIT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// `Ok(false)` means the command ran but its audit failed.
fn run(command: Command) -> polycomp::Result<bool> {
    match command {
        Command::Plan { common, inputs, json } => plan(&common, &inputs, json),
        Command::GenMdp { common, gen, out } => {
            let c = generate_random_mdp(&gen.config(common.seed.unwrap_or(0)))?;
            match out.or_else(|| common.out_dir.map(|d| d.join("mdp.json"))) {
                Some(path) => save_cmp(&c, &path)?,
                None => println!("{}", serde_json::to_string_pretty(&c.to_description())?),
            }
            Ok(true)
        }
        Command::Estimate {
            common,
            mdp,
            gen,
            policy,
            setting,
            mode,
            n,
            samples_csv,
        } => estimate(&common, mdp, &gen, policy, setting, mode, n, samples_csv),
        Command::VerifyTv { common, exec } => verify(&common, &exec, Metric::Tv),
        Command::VerifyRenyi { common, exec } => verify(&common, &exec, Metric::Renyi2),
        Command::Geometry {
            common,
            n,
            sigma2,
            restarts,
            iterations,
        } => geometry(&common, &n, &sigma2, restarts, iterations),
        Command::Compress {
            common,
            mdp,
            candidates,
            metric,
            sigma,
        } => compress(&common, &mdp, &candidates, metric.into(), sigma),
    }
}

// =============================================================================
// Subcommands
// =============================================================================

fn plan(common: &Common, args: &PlanArgs, json_out: bool) -> polycomp::Result<bool> {
    let mut p: PlanInputs = match &common.config {
        Some(path) => polycomp::harness::io::read_json(path)?,
        None => PlanInputs::default(),
    };
    macro_rules! take {
        ($($f:ident),*) => { $( if let Some(v) = args.$f { p.$f = v; } )* };
    }
    take!(delta, sigma_tv, sigma2, gamma, gamma0, states, actions, k);

    let n_pairs = p.states * p.actions;
    let mut budgets: Vec<SampleBudget> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();
    let mut push = |name: &str, r: polycomp::Result<Vec<SampleBudget>>| match r {
        Ok(mut b) => budgets.append(&mut b),
        Err(e) => skipped.push(format!("{name}: {e}")),
    };
    // Lemma-1 deviation in L1, i.e. twice the TV threshold.
    push(
        "weissman",
        weissman_samples(n_pairs, p.delta, 2.0 * p.sigma_tv).map(|b| vec![b]),
    );
    push(
        "chain_concentration",
        chain_concentration_samples(p.gamma0, p.sigma_tv, p.delta).map(|b| vec![b]),
    );
    push(
        "tv_known_single",
        tv_known_single(p.gamma0, p.sigma_tv, p.delta).map(|b| vec![b]),
    );
    push(
        "tv_known_K",
        tv_known_k(p.gamma0, p.sigma_tv, p.delta, p.k).map(|b| vec![b]),
    );
    for scope in [UnknownScope::PerPair, UnknownScope::Total] {
        push(
            "tv_unknown",
            tv_unknown(p.gamma, p.states, p.actions, p.sigma_tv, p.delta, scope).map(|b| vec![b]),
        );
    }
    push(
        "renyi_known",
        renyi_known_bounds(p.gamma0, p.sigma2, n_pairs, p.k, p.delta).map(|b| vec![b.lower, b.upper]),
    );
    push(
        "renyi_unknown",
        renyi_unknown_bounds(p.gamma, p.states, p.actions, p.sigma2, p.delta).map(|b| {
            let mut v = vec![b.lower, b.upper];
            v.extend(b.rederived_lower);
            v.extend(b.rederived_upper);
            v
        }),
    );
    let thresholds = [
        threshold_meaningful(n_pairs, Threshold::Tv(p.sigma_tv))?,
        threshold_meaningful(n_pairs, Threshold::Renyi2(p.sigma2))?,
    ];
    let report = json!({
        "inputs": p,
        "budgets": budgets,
        "thresholds": thresholds,
        "skipped": skipped,
    });

    if json_out {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{:<22} {:>16} {:>12}  flags", "formula_id", "n_real", "n_int");
        for b in &budgets {
            println!(
                "{:<22} {:>16.4} {:>12}  {}",
                b.formula_id.as_str(),
                b.n_real,
                b.n_int,
                b.flags.join(",")
            );
        }
        for t in &thresholds {
            println!(
                "threshold {:?}: meaningful={} (limit {:.6}; printed limit {:.6}, meaningful_printed={})",
                t.threshold, t.meaningful, t.oracle_limit, t.printed_limit, t.meaningful_printed
            );
        }
        for s in &skipped {
            println!("skipped {s}");
        }
    }
    if let Some(dir) = &common.out_dir {
        write_json(&report, &dir.join("plan.json"))?;
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    common: &Common,
    mdp: Option<PathBuf>,
    gen: &GenArgs,
    policy: Option<PathBuf>,
    setting: SettingArg,
    mode: ModeArg,
    n: u64,
    samples_csv: Option<PathBuf>,
) -> polycomp::Result<bool> {
    let seed = common.seed.unwrap_or(0);
    let c = match &mdp {
        Some(path) => load_cmp(path)?,
        None => generate_random_mdp(&gen.config(seed))?,
    };
    let p = match &policy {
        Some(path) => load_policy(path)?,
        None => TabularPolicy::uniform(c.num_states(), c.num_actions()),
    };
    let d = occupancy(&c, &p)?;
    let rng_seed = RngSeed::new(seed, 0);
    let (d_hat, env_steps, samples) = match setting {
        SettingArg::Known => {
            let mode = match mode {
                ModeArg::Geometric => SamplingMode::Geometric,
                ModeArg::Stationary => SamplingMode::Stationary,
            };
            let s = sample_occupancy(&c, &p, n as usize, rng_seed, mode)?;
            (s.empirical, s.env_steps, Some(s.samples))
        }
        SettingArg::Unknown => {
            let e = estimate_transition_model(&c, n, rng_seed)?;
            (occupancy_on_estimate(&e, &p)?, e.total_draws(), None)
        }
    };
    let (renyi, support_violation) = match renyi2(d_hat.values(), d.values())? {
        Renyi2::Finite(v) => (Some(v), None),
        Renyi2::Infinite { index } => (None, Some(index)),
    };
    let report = json!({
        "seed": seed,
        "n": n,
        "setting": format!("{setting:?}").to_lowercase(),
        "exact": d.values(),
        "estimate": d_hat.values(),
        "tv": total_variation(d_hat.values(), d.values())?,
        "renyi2": renyi,
        "renyi2_support_violation": support_violation,
        "env_steps": env_steps,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = &common.out_dir {
        write_json(&report, &dir.join("estimate.json"))?;
    }
    if let (Some(path), Some(samples)) = (samples_csv, samples) {
        let rows: Vec<(usize, usize, usize, usize)> = samples
            .iter()
            .enumerate()
            .map(|(i, &(s, a))| (0, i, s, a))
            .collect();
        write_csv(&rows, &["replicate", "step", "s", "a"], &path)?;
    }
    Ok(true)
}

/// Shipped defaults: the reversible 5-state, 3-action known-model audit.
fn default_experiment(metric: Metric) -> ExperimentConfig {
    let threshold = match metric {
        Metric::Tv => 0.1,
        Metric::Renyi2 => 1.5,
    };
    ExperimentConfig {
        mdp: MdpSource::Generator(GeneratorConfig {
            num_states: 5,
            num_actions: 3,
            branching: 2,
            seed: 2024,
            reversible: true,
            gamma: 0.9,
        }),
        policy: PolicySource::Uniform,
        setting: Setting::KnownModel,
        metric,
        threshold,
        delta: 0.05,
        replicates: 200,
        master_seed: 7,
        k: 1,
        per_pair_cap: 100_000,
        max_samples: 50_000_000,
        sampling_mode: SamplingMode::Geometric,
        output: Default::default(),
        record_timing: false,
    }
}

fn verify(common: &Common, exec: &Exec, metric: Metric) -> polycomp::Result<bool> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => default_experiment(metric),
    };
    if cfg.metric != metric {
        return Err(Error::InvalidArgument(format!(
            "config metric {:?} does not match this subcommand",
            cfg.metric
        )));
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = common.replicates {
        cfg.replicates = r;
    }
    cfg.record_timing |= exec.timing;

    let mode = if exec.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let report = match exec.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| run_concentration_experiment(&cfg, mode))?,
        None => run_concentration_experiment(&cfg, mode)?,
    };

    let (records_path, summary_path) = output_paths(common, &cfg);
    write_csv(&report.records, &RUN_RECORD_HEADER, &records_path)?;
    write_json(&report, &summary_path)?;
    for ph in &report.phases {
        println!(
            "{:<22} n_used={:<10} violations={}/{} rate={:.4} mean_div={:.6} {}",
            ph.formula_id,
            ph.n_used,
            ph.violations,
            cfg.replicates,
            ph.violation_rate,
            ph.mean_divergence,
            ph.flags.join(",")
        );
    }
    println!(
        "{} violation_rate={:.4} delta={} records={} summary={}",
        if report.passed { "PASS" } else { "FAIL" },
        report.violation_rate,
        cfg.delta,
        records_path.display(),
        summary_path.display()
    );
    Ok(report.passed)
}

fn output_paths(common: &Common, cfg: &ExperimentConfig) -> (PathBuf, PathBuf) {
    match &common.out_dir {
        Some(dir) => (dir.join("records.csv"), dir.join("summary.json")),
        None => {
            let dir = Path::new(DEFAULT_OUT_DIR);
            (
                cfg.output
                    .records_csv
                    .clone()
                    .unwrap_or_else(|| dir.join("records.csv")),
                cfg.output
                    .summary_json
                    .clone()
                    .unwrap_or_else(|| dir.join("summary.json")),
            )
        }
    }
}

fn geometry(
    common: &Common,
    n: &[usize],
    sigma2: &[f64],
    restarts: Option<usize>,
    iterations: Option<usize>,
) -> polycomp::Result<bool> {
    let mut budget = OracleBudget::default();
    budget.restarts = restarts.unwrap_or(budget.restarts);
    budget.iterations = iterations.unwrap_or(budget.iterations);
    let results = run_geometry_audit(n, sigma2, common.seed.unwrap_or(0), budget)?;
    let dir = common
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let certs: Vec<_> = results.iter().map(|(c, _)| c).collect();
    let rows: Vec<_> = results.iter().map(|(_, r)| r.clone()).collect();
    write_json(&certs, &dir.join("certificates.json"))?;
    write_csv(&rows, &GEOMETRY_HEADER, &dir.join("certificates.csv"))?;
    for r in &rows {
        println!(
            "n={:<3} sigma2={:<5} max_tv={:.6} oracle_max={:.6} min_tv={:.6} oracle_min={:.6} residual={:.1e}{}{}",
            r.n,
            r.sigma2,
            r.max_tv,
            r.oracle_max,
            r.min_tv,
            r.oracle_min,
            r.max_residual,
            if r.oracle_exceeds_max_tv { " oracle_exceeds_max_tv" } else { "" },
            if r.failed { " FAILED" } else { "" }
        );
    }
    Ok(rows.iter().all(|r| !r.failed))
}

fn compress(
    common: &Common,
    mdp: &Path,
    candidates: &str,
    metric: Metric,
    sigma: f64,
) -> polycomp::Result<bool> {
    let c: Cmp = load_cmp(mdp)?;
    let policies = if candidates == "enumerate-deterministic" {
        enumerate_deterministic(c.num_states(), c.num_actions(), 100_000)?
    } else {
        let count: usize = candidates.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "--candidates must be \"enumerate-deterministic\" or a count, got {candidates:?}"
            ))
        })?;
        random_policies(c.num_states(), c.num_actions(), count, common.seed.unwrap_or(0))?
    };
    let cs = CandidateSet::from_policies(&c, policies)?;
    let result = greedy_cover(&cs, sigma, metric)?;
    let check = verify_cover(&cs, &result)?;
    let report = json!({
        "num_candidates": cs.len(),
        "candidates": candidates,
        "seed": common.seed.unwrap_or(0),
        "result": result,
        "verification": check,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = &common.out_dir {
        write_json(&report, &dir.join("compress.json"))?;
    }
    Ok(check.ok)
}
