//! Fixture generation, planning runs and comparison reports.

pub mod compare;
pub mod fixtures;
pub mod run;

pub use compare::{compare_report, convergence_csv, scaling_csv, scaling_rows, CompareReport, ScalingRow};
pub use run::{network_hash, run_plan, verify_plan, Mode, PlanConfig, RunArtifacts, RunError, RunSummary};
