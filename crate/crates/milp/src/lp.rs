//! LP relaxation interface over the sparse simplex engine.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::MilpError;
use crate::model::{MilpModel, Sense};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status == Optimal`.
    pub x: Vec<f64>,
    /// Includes the model's objective offset.
    pub objective: f64,
}

/// Engine-side copy of a model with every variable relaxed to continuous.
pub(crate) struct Relaxation {
    pub problem: Problem,
    pub handles: Vec<Variable>,
}

pub(crate) fn relax(model: &MilpModel, bounds: Option<&[(f64, f64)]>) -> Relaxation {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let handles: Vec<Variable> = model
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let b = bounds.map_or((v.lower, v.upper), |b| b[i]);
            problem.add_var(model.objective[i], b)
        })
        .collect();
    for c in &model.cons {
        let op = match c.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        problem.add_constraint(
            c.terms.iter().map(|&(v, a)| (handles[v.0], a)).collect::<Vec<_>>(),
            op,
            c.rhs,
        );
    }
    Relaxation { problem, handles }
}

pub(crate) fn engine_err(e: microlp::Error) -> MilpError {
    MilpError::Engine(e.to_string())
}

/// Solves the continuous relaxation; integrality markers are ignored.
pub fn solve_lp(model: &MilpModel) -> Result<LpSolution, MilpError> {
    model.validate()?;
    solve_lp_bounds(model, None)
}

pub(crate) fn solve_lp_bounds(
    model: &MilpModel,
    bounds: Option<&[(f64, f64)]>,
) -> Result<LpSolution, MilpError> {
    if let Some(b) = bounds {
        if b.iter().any(|&(lo, hi)| lo > hi) {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![],
                objective: f64::INFINITY,
            });
        }
    }
    let rel = relax(model, bounds);
    match rel.problem.solve() {
        Ok(outcome) => {
            let sol = outcome
                .into_solution()
                .map_err(|_| MilpError::Engine("LP solve interrupted".into()))?;
            let x: Vec<f64> = rel.handles.iter().map(|&h| sol.var_value_raw(h)).collect();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: sol.objective() + model.obj_offset,
                x,
            })
        }
        Err(microlp::Error::Infeasible) => Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![],
            objective: f64::INFINITY,
        }),
        Err(microlp::Error::Unbounded) => Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![],
            objective: f64::NEG_INFINITY,
        }),
        Err(e) => Err(engine_err(e)),
    }
}
