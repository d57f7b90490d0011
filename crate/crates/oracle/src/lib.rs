//! Analytical reliability assessment of a fixed plan: every built branch is
//! faulted in turn, the interrupted set follows from the normal-state feeder
//! structure and the best post-fault reconfiguration is found with a small
//! restoration MILP.

mod report;
mod restore;

pub use report::{
    check_requirements, evaluate_plan_reliability, evaluate_stage, AreaCheck, FaultDetail, ReliabilityReport,
    RequirementCheck, StageReliability,
};
pub use restore::{simulate_fault, FaultOutcome, StageTopology, RESTORE_TIE_BREAK};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("restoration after fault on {branch} failed: {reason}")]
    Restoration { branch: String, reason: String },
}
