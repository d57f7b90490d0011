//! Reliability-constrained distribution network planning.

pub mod builder;
pub mod error;
pub mod network;
pub mod plan;

pub use error::{NetworkError, PlanError, Violation};
pub use network::{aging_vector, pv_factors, Horizon, Network, NetworkSpec};
pub use plan::{Plan, StageIndices, StagePlan};
