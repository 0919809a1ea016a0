//! Configured, reproducible experiments.

pub mod config;
pub mod runner;

pub use config::{DemandSpec, EvalChoice, ExperimentConfig, ExperimentKind, Scenario};
pub use runner::{
    run, run_adaptive_convergence, run_estimate, run_policy_compare, run_relaxation, run_violation_curve, RunOutput,
};
