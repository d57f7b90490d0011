//! Parallel augmented Lagrangian coordination of the backbone and sub-area
//! planning models: Gauss-Seidel passes over vertex hulls, Lagrangian dual
//! evaluations that grow the hulls, bundle-style serious / null steps, an
//! adaptive penalty and restarted momentum on the multipliers.

pub mod config;
pub mod hull;
pub mod pairing;
pub mod repair;
pub mod run;
pub mod state;
pub mod subproblem;

pub use config::CoordConfig;
pub use hull::{minimize_over_hull, project_simplex, HullPoint, Vertex, VertexSet};
pub use pairing::{project_coordination, Pair, Pairing, PER_AREA};
pub use repair::{repair, Repaired};
pub use run::{initialize, run_coordination, run_coordination_with, Audit, ConvergenceTrace, CoordinationResult, TraceRow};
pub use state::{accelerate_multipliers, serious_step_update, update_penalty, CoordinationState, StepOutcome};
pub use subproblem::{evaluate_dual, subproblems, DualResult, Subproblem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoordError {
    #[error("invalid coordination config: {0}")]
    Config(String),
    #[error("network has no partition")]
    NoPartition,
    #[error("subproblem {name}: {reason}")]
    Subproblem { name: String, reason: String },
    #[error("no consistent plan could be assembled from the vertex sets")]
    NoIncumbent,
    #[error(transparent)]
    Milp(#[from] gridplan_milp::MilpError),
    #[error(transparent)]
    Plan(#[from] gridplan_core::PlanError),
}
