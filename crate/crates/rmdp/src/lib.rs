//! Tabular finite-horizon robust MDP toolkit.
//!
//! Provides exact robust dynamic programming and the sample-based robust
//! phased value learner over four ambiguity sets — total variation,
//! chi-square, Kullback-Leibler, and Wasserstein — each solved through its
//! single-variable dual reformulation, together with brute-force primal
//! oracles for verification, a deterministic generative-model sampler, and
//! the gambler's problem environment.
//!
//! With the default `parallel` feature the per-phase backups, sampling, and
//! evaluation loops run data-parallel on rayon; without it they fall back
//! to sequential iteration with bit-identical results.

pub mod duals;
pub mod error;
pub mod gamblers;
pub mod model;
pub mod oracle;
mod par;
pub mod planner;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod uncertainty;

pub use error::{ModelViolation, RmdpError};
pub use model::{
    expectation, greedy_value_backup, validate_model, Policy, TabularModel, ValueFunction,
};
pub use planner::{
    classical_dp, evaluate_robust, evaluate_under, robust_dp, rpvl, suboptimality_gap, PlanResult,
    SolveStats,
};
pub use sampling::{mle_estimate, EmpiricalModel, GenerativeModel, SampleBudget};
pub use uncertainty::{
    DistanceMetric, DivergenceKind, DualSolution, SolverConfig, UncertaintySpec,
};
