//! # polycomp
//!
//! Numerical toolkit for the statistics of policy-space compression in
//! tabular MDPs.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`mdp`] | CMPs, tabular policies, exact discounted occupancies, spectral gap, returns |
//! | [`divergence`] | total variation, exponentiated 2-Rényi divergence, importance weights |
//! | [`sampling`] | occupancy samplers, generative-model estimates, simulation bound |
//! | [`planner`] | concentration bounds and sample-size formulas |
//! | [`geometry`] | closed-form simplex families and a brute-force extremal oracle |
//! | [`compress`] | max-min covering of a finite candidate set |
//! | [`harness`] | random MDPs, concentration audits, file formats |
//!
//! State-action pairs are flattened row-major everywhere: index `s * |A| + a`.
//! Transition tensors are flattened as `(s * |A| + a) * |S| + s'`.
//!
//! ```rust
//! use polycomp::mdp::{occupancy, Cmp, TabularPolicy};
//!
//! // s0 -> s1 -> s1, one action, start in s0.
//! let cmp = Cmp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0], 0.5, None).unwrap();
//! let pi = TabularPolicy::uniform(2, 1);
//! let d = occupancy(&cmp, &pi).unwrap();
//! assert!((d.values()[0] - 0.5).abs() < 1e-12);
//! ```

// `!(x >= 0.0)` is used deliberately throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compress;
pub mod divergence;
pub mod geometry;
pub mod harness;
mod linalg;
pub mod mdp;
pub mod planner;
pub mod rng;
pub mod sampling;

pub use compress::{greedy_cover, verify_cover, CandidateSet, CompressionResult, Metric};
pub use divergence::{renyi2, total_variation, Renyi2};
pub use mdp::{occupancy, Cmp, OccupancyMeasure, TabularPolicy};
pub use rng::RngSeed;

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid CMP: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCmp(Vec<mdp::Violation>),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular linear system: pivot {pivot:e} at column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("eigenvalue iteration did not converge (residual {residual:e})")]
    EigenNoConvergence { residual: f64 },

    #[error("reward table required")]
    MissingReward,

    #[error("empty sample batch")]
    EmptyBatch,

    #[error(
        "support violation: reference distribution is zero at index {index} where the other is positive"
    )]
    SupportViolation { index: usize },

    #[error("chain does not mix (spectral gap is zero)")]
    NoMixing,

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("oracle found no feasible point within budget")]
    OracleNoFeasiblePoint,

    #[error("candidate {candidate} cannot be covered at sigma = {sigma}")]
    Uncoverable { candidate: usize, sigma: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
