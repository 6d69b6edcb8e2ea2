//! End-to-end experiment properties through the library API.

use std::path::PathBuf;

use polycomp::geometry::OracleBudget;
use polycomp::harness::{run_concentration_experiment, run_geometry_audit, Execution, ExperimentConfig};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn shipped_configs_stay_within_delta() {
    for name in [
        "verify_tv_known.json",
        "verify_tv_unknown.json",
        "verify_renyi_known.json",
        "verify_renyi_unknown.json",
    ] {
        let cfg = ExperimentConfig::from_file(&shipped(name)).unwrap();
        let report = run_concentration_experiment(&cfg, Execution::Parallel).unwrap();
        assert!(report.passed, "{name}: violation rate {}", report.violation_rate);
        assert_eq!(report.records.len(), cfg.replicates * report.phases.len());
    }
}

#[test]
fn geometric_steps_match_effective_horizon() {
    let cfg = ExperimentConfig::from_file(&shipped("verify_tv_known.json")).unwrap();
    let cfg = ExperimentConfig {
        replicates: 40,
        ..cfg
    };
    let report = run_concentration_experiment(&cfg, Execution::Parallel).unwrap();
    let phase = &report.phases[0];
    let mean = phase.mean_steps_per_sample.unwrap();
    let se = phase.steps_per_sample_stderr.unwrap();
    let horizon = 1.0 / (1.0 - report.gamma);
    assert!(
        (mean - horizon).abs() <= 3.0 * se,
        "mean {mean}, horizon {horizon}, se {se}"
    );
}

#[test]
fn replicate_one_reports_are_identical() {
    let cfg = ExperimentConfig::from_file(&shipped("verify_tv_known.json")).unwrap();
    let cfg = ExperimentConfig { replicates: 1, ..cfg };
    let a = run_concentration_experiment(&cfg, Execution::Serial).unwrap();
    let b = run_concentration_experiment(&cfg, Execution::Serial).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(a.records, b.records);
}

#[test]
fn geometry_audit_grid() {
    let rows = run_geometry_audit(&[3, 4, 6], &[1.5, 2.0], 0, OracleBudget::default()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|(_, r)| !r.failed));
    let (_, r42) = rows.iter().find(|(_, r)| r.n == 4 && r.sigma2 == 2.0).unwrap();
    assert!(r42.oracle_max >= 0.5 - 1e-6);
    assert!((r42.max_tv - 3f64.sqrt() / 4.0).abs() < 1e-12);
    assert!(r42.oracle_exceeds_max_tv);
}

#[test]
fn geometry_audit_rejects_out_of_range_pairs() {
    assert!(run_geometry_audit(&[3], &[3.0], 0, OracleBudget::default()).is_err());
    assert!(run_geometry_audit(&[2], &[1.5], 0, OracleBudget::default()).is_err());
}
