//! Mixed-integer linear programming core.
//!
//! [`MilpModel`] is a flat container of bounded variables and sparse rows.
//! LP relaxations go through a sparse revised simplex; integrality is handled
//! by a deterministic best-bound branch-and-bound in [`bnb`].

pub mod bnb;
pub mod error;
pub mod lp;
pub mod lpdump;
pub mod model;

pub use bnb::{solve_milp, solve_milp_with_hint, MilpSolution, MilpStatus, SolverConfig};
pub use error::MilpError;
pub use lp::{solve_lp, LpSolution, LpStatus};
pub use lpdump::write_lp;
pub use model::{evaluate_point, Constraint, MilpModel, PointEvaluation, Sense, VarId, VarKind, Variable};
