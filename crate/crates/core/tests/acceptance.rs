//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Run with `cargo test -p polycomp --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use polycomp::compress::random_policies;
use polycomp::divergence::weight_diagnostics;
use polycomp::geometry::{certificate, family_checks, make_point, PointKind};
use polycomp::harness::{
    generate_random_mdp, run_concentration_experiment, Execution, ExperimentConfig, GeneratorConfig,
    MdpSource, PolicySource, Setting,
};
use polycomp::mdp::{occupancy, occupancy_oracle};
use polycomp::planner::{
    renyi_known_bounds, renyi_unknown_bounds, threshold_meaningful, tv_known_k, tv_known_single, tv_unknown,
    weissman_samples, Threshold, UnknownScope,
};
use polycomp::sampling::{
    estimate_transition_model, occupancy_on_estimate, simulation_gap_bound, SamplingMode,
};
use polycomp::{renyi2, total_variation, Metric, RngSeed};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

// =============================================================================
// Criteria
// =============================================================================

fn occupancy_matches_series() -> Outcome {
    let mut rng = RngSeed::new(1, 0).rng();
    let gammas = [0.8, 0.9, 0.99];
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let cfg = GeneratorConfig {
            num_states: rng.random_range(1..=6),
            num_actions: rng.random_range(1..=4),
            branching: 1,
            seed: 1000 + i,
            reversible: i % 2 == 1,
            gamma: gammas[i as usize % 3],
        };
        let cfg = GeneratorConfig {
            branching: rng.random_range(1..=cfg.num_states),
            ..cfg
        };
        let c = generate_random_mdp(&cfg).unwrap();
        let p = random_policies(c.num_states(), c.num_actions(), 1, i)
            .unwrap()
            .remove(0);
        let exact = occupancy(&c, &p).unwrap();
        let series = occupancy_oracle(&c, &p, 1e-11).unwrap();
        for (a, b) in exact.values().iter().zip(series.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |solve - series| = {worst:.3e} over 50 MDPs"),
    )
}

fn variance_identity() -> Outcome {
    let mut rng = RngSeed::new(2, 0).rng();
    let mut worst = 0.0f64;
    let mut worst_direct = 0.0f64;
    let mut largest = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=30);
        let p = random_distribution(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        let diag = weight_diagnostics(&p, &q, 10, 1.0, 0.9).unwrap();
        worst = worst.max((diag.exact_variance - (diag.renyi2 - 1.0)).abs());
        // Independent evaluation Var_q[w] = Σ q (p/q - 1)², compared relative
        // to D2 because the weights can be large.
        let direct: f64 = p.iter().zip(&q).map(|(a, b)| b * (a / b - 1.0).powi(2)).sum();
        worst_direct = worst_direct.max((direct - diag.exact_variance).abs() / diag.renyi2);
        largest = largest.max(diag.renyi2);
    }
    outcome(
        worst <= 1e-12 && worst_direct <= 1e-12,
        format!(
            "max |Var - (D2 - 1)| = {worst:.3e}; direct variance rel. error {worst_direct:.3e}; largest D2 {largest:.1} (1000 pairs)"
        ),
    )
}

fn geometry_identities() -> Outcome {
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst_residual = 0.0f64;
    let mut worst_tv = 0.0f64;
    for n in [3usize, 4, 5, 6, 8, 10] {
        for sigma2 in [1.1, 1.5, 2.0, 3.0] {
            if sigma2 >= n as f64 {
                continue;
            }
            let (checks, infeasible) = family_checks(n, sigma2).unwrap();
            skipped += infeasible.len();
            for c in checks {
                checked += 1;
                worst_residual = worst_residual.max(c.residual);
                worst_tv = worst_tv.max((c.tv - c.expected_tv).abs());
            }
        }
    }
    outcome(
        worst_residual <= 1e-10 && worst_tv <= 1e-12,
        format!(
            "{checked} family points (skipped {skipped} infeasible): max residual {worst_residual:.2e}, max TV error {worst_tv:.2e}"
        ),
    )
}

fn oracle_sandwich() -> Outcome {
    let cert = certificate(4, 2.0, 0).unwrap();
    let max = cert.oracle.tv_max_found;
    let min = cert.oracle.tv_min_found;
    let flagged = cert.comparisons.oracle_exceeds_max_tv;
    outcome(
        max >= 0.5 - 1e-6 && min <= 1.0 / 3.0 + 1e-6 && flagged,
        format!(
            "tv_max {max:.9} (closed form {:.4}), tv_min {min:.9}, exceeds flag {flagged}",
            cert.closed_form.max_tv
        ),
    )
}

fn simulation_inequality() -> Outcome {
    let mut rng = RngSeed::new(5, 0).rng();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100u64 {
        let ns = rng.random_range(2..=6);
        let cfg = GeneratorConfig {
            num_states: ns,
            num_actions: rng.random_range(1..=4),
            branching: rng.random_range(1..=ns),
            seed: 500 + i,
            reversible: false,
            gamma: [0.5, 0.8, 0.9, 0.95][i as usize % 4],
        };
        let c = generate_random_mdp(&cfg).unwrap();
        let e = estimate_transition_model(&c, rng.random_range(1..=200), RngSeed::new(77, i)).unwrap();
        let p = random_policies(c.num_states(), c.num_actions(), 1, 9000 + i)
            .unwrap()
            .remove(0);
        let d = occupancy(&c, &p).unwrap();
        let d_hat = occupancy_on_estimate(&e, &p).unwrap();
        let tv = total_variation(d_hat.values(), d.values()).unwrap();
        let bound = simulation_gap_bound(&c, &e, &p).unwrap();
        worst = worst.max(tv - bound);
    }
    outcome(
        worst <= 1e-10,
        format!("max (TV - bound) = {worst:.3e} over 100 instances"),
    )
}

fn known_model_audit() -> Outcome {
    let cfg = ExperimentConfig {
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
        metric: Metric::Tv,
        threshold: 0.1,
        delta: 0.05,
        replicates: 200,
        master_seed: 7,
        k: 1,
        per_pair_cap: 100_000,
        max_samples: 50_000_000,
        sampling_mode: SamplingMode::Geometric,
        output: Default::default(),
        record_timing: false,
    };
    let r = run_concentration_experiment(&cfg, Execution::Parallel).unwrap();
    let ph = &r.phases[0];
    outcome(
        r.violation_rate <= 0.05 && ph.formula_id == "tv_known_single",
        format!(
            "gamma0 {:.4}, N {}, violations {}/200, mean TV {:.4}",
            r.gamma0.unwrap_or(f64::NAN),
            ph.n_used,
            ph.violations,
            ph.mean_divergence
        ),
    )
}

fn unknown_model_audit() -> Outcome {
    let cfg = ExperimentConfig {
        mdp: MdpSource::Generator(GeneratorConfig {
            num_states: 4,
            num_actions: 2,
            branching: 2,
            seed: 31,
            reversible: false,
            gamma: 0.8,
        }),
        policy: PolicySource::Uniform,
        setting: Setting::UnknownModel,
        metric: Metric::Tv,
        threshold: 0.2,
        delta: 0.1,
        replicates: 100,
        master_seed: 11,
        k: 1,
        per_pair_cap: 100_000,
        max_samples: 50_000_000,
        sampling_mode: SamplingMode::Geometric,
        output: Default::default(),
        record_timing: false,
    };
    let r = run_concentration_experiment(&cfg, Execution::Parallel).unwrap();
    let ph = &r.phases[0];
    let raw = ph.budget.as_ref().map(|b| b.n_real).unwrap_or(f64::NAN);
    outcome(
        r.violation_rate <= 0.1,
        format!(
            "per-pair formula {raw:.1}, used {} {}, violations {}/100, mean TV {:.2e}",
            ph.n_used,
            ph.flags.join(","),
            ph.violations,
            ph.mean_divergence
        ),
    )
}

fn planner_regression() -> Outcome {
    let w = weissman_samples(10, 0.1, 0.2).unwrap();
    let single = tv_known_single(0.5, 0.1, 0.1).unwrap();
    let k = tv_known_k(1.0, 0.2, 0.05, 5).unwrap();
    let unknown = tv_unknown(0.9, 5, 3, 0.1, 0.05, UnknownScope::PerPair).unwrap();
    let rk = renyi_known_bounds(1.0, 2.0, 8, 1, 0.1).unwrap();
    let ru = renyi_unknown_bounds(0.9, 5, 3, 2.0, 0.1).unwrap();

    // Oracle values by direct evaluation of the printed expressions.
    let unknown_oracle = 8.0 * 0.81 * 5.0 / (0.01 * 0.01) * 40f64.ln();
    let checks = [
        ("weissman", w.n_int == 1498),
        ("tv_known_single", single.n_int == 7190),
        ("tv_known_K", k.n_int == 923),
        (
            "tv_unknown",
            ((unknown.n_real - 1.195_20e6) / 1.195_20e6).abs() < 1e-5
                && ((unknown.n_real - unknown_oracle) / unknown_oracle).abs() < 1e-9,
        ),
        ("renyi_known", (rk.lower.n_int, rk.upper.n_int) == (14, 25)),
        (
            "renyi_unknown",
            (ru.lower.n_real.floor(), ru.upper.n_real.floor()) == (56872.0, 97061.0),
        ),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        format!(
            "weissman {}, single {}, K {}, unknown {:.6e}, renyi_known {}/{}, renyi_unknown {:.2}/{:.2}{}",
            w.n_int,
            single.n_int,
            k.n_int,
            unknown.n_real,
            rk.lower.n_int,
            rk.upper.n_int,
            ru.lower.n_real,
            ru.upper.n_real,
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failed {failed:?}")
            }
        ),
    )
}

fn uniform_limit() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in 2usize..=12 {
        let uniform = make_point(n, PointKind::Uniform).unwrap().values;
        let mut max = 0.0f64;
        for i in 0..10_000u64 {
            let p = make_point(n, PointKind::Random(RngSeed::new(n as u64, i)))
                .unwrap()
                .values;
            max = max.max(renyi2(&p, &uniform).unwrap().value());
        }
        let vertex = make_point(n, PointKind::Vertex(1)).unwrap().values;
        let at_vertex = renyi2(&vertex, &uniform).unwrap().value();
        let report = threshold_meaningful(n, Threshold::Tv(0.5)).unwrap();
        let nf = n as f64;
        let limits_ok = (report.printed_limit - ((nf - 1.0) / nf).sqrt()).abs() < 1e-15
            && (report.oracle_limit - (nf - 1.0) / nf).abs() < 1e-15;
        ok &= max <= nf && at_vertex == nf && limits_ok;
        if n == 4 || n == 12 {
            notes.push(format!(
                "n={n}: sampled max {max:.3}, vertex {at_vertex}, TV limits printed {:.4} / oracle {:.4}",
                report.printed_limit, report.oracle_limit
            ));
        }
    }
    outcome(ok, notes.join("; "))
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_polycomp");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| -> Option<Vec<u8>> {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["verify-tv", "--replicates", "50", "--out-dir"])
            .arg(&out)
            .args(extra)
            .output()
            .ok()?;
        if !status.status.success() {
            return None;
        }
        std::fs::read(out.join("records.csv")).ok()
    };
    let serial_a = run("serial_a", &["--serial"]);
    let serial_b = run("serial_b", &["--serial"]);
    let par_a = run("par_a", &["--threads", "4"]);
    let par_b = run("par_b", &["--threads", "2"]);
    let all_same = serial_a.is_some() && serial_a == serial_b && serial_a == par_a && par_a == par_b;
    outcome(
        all_same,
        format!(
            "4 runs (2 serial, 2 parallel): {} bytes each, identical = {all_same}",
            serial_a.map(|v| v.len()).unwrap_or(0)
        ),
    )
}

// =============================================================================
// Driver
// =============================================================================

fn main() -> ExitCode {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (
            "occupancy solve matches truncated series",
            Duration::from_secs(10),
            occupancy_matches_series,
        ),
        (
            "importance-weight variance equals D2 - 1",
            Duration::from_secs(5),
            variance_identity,
        ),
        (
            "geometry family identities",
            Duration::from_secs(5),
            geometry_identities,
        ),
        (
            "oracle sandwich at n=4, sigma2=2",
            Duration::from_secs(60),
            oracle_sandwich,
        ),
        (
            "simulation inequality",
            Duration::from_secs(60),
            simulation_inequality,
        ),
        (
            "known-model TV concentration audit",
            Duration::from_secs(300),
            known_model_audit,
        ),
        (
            "unknown-model TV concentration audit",
            Duration::from_secs(300),
            unknown_model_audit,
        ),
        (
            "planner worked values",
            Duration::from_secs(1),
            planner_regression,
        ),
        (
            "divergence limits from uniform",
            Duration::from_secs(10),
            uniform_limit,
        ),
        (
            "verify-tv byte-identical outputs",
            Duration::from_secs(300),
            cli_determinism,
        ),
    ];
    let mut failures = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.2}s / {}s limit{})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
