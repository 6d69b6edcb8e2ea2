//! Random MDP generation, bound-audit experiments and file I/O.

pub mod experiment;
pub mod generator;
pub mod io;

pub use experiment::{
    phase_seed, run_concentration_experiment, run_geometry_audit, ConcentrationReport, Execution,
    ExperimentConfig, GeometryAuditRow, MdpSource, OutputPaths, PhaseSummary, PolicySource, RunRecord,
    Setting, GEOMETRY_HEADER, RUN_RECORD_HEADER,
};
pub use generator::{generate_random_mdp, GeneratorConfig};
