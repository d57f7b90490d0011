//! Flat MILP container.
//!
//! Variables and rows are addressed by dense indices. Rows hold sparse
//! coefficient lists; the objective is stored densely.

use std::fmt;

use crate::error::MilpError;

/// Index of a decision variable inside a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn idx(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Branching class; higher classes are branched on first.
    pub priority: i32,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    /// Sparse row; each variable appears at most once.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Minimisation model: `min c'x + offset` subject to rows and bounds.
#[derive(Clone, Debug, Default)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub obj_offset: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn num_integral(&self) -> usize {
        self.vars.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            priority: 0,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn set_priority(&mut self, v: VarId, priority: i32) {
        self.vars[v.0].priority = priority;
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    /// Adds a row. Repeated variables are merged and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let mut merged: Vec<(VarId, f64)> = terms.into_iter().collect();
        merged.sort_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(merged.len());
        for (v, c) in merged {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.cons.push(Constraint {
            name: name.into(),
            terms: out,
            sense,
            rhs,
        });
        self.cons.len() - 1
    }

    pub fn set_obj(&mut self, v: VarId, c: f64) {
        self.objective[v.0] = c;
    }

    pub fn add_obj(&mut self, v: VarId, c: f64) {
        self.objective[v.0] += c;
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    pub fn fix(&mut self, v: VarId, value: f64) {
        self.set_bounds(v, value, value);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Structural checks: finite data, consistent bounds, in-range indices.
    pub fn validate(&self) -> Result<(), MilpError> {
        if self.objective.len() != self.vars.len() {
            return Err(MilpError::Invalid(format!(
                "objective length {} != variable count {}",
                self.objective.len(),
                self.vars.len()
            )));
        }
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::Invalid(format!(
                    "variable {} ({}) has bounds [{}, {}]",
                    i, v.name, v.lower, v.upper
                )));
            }
            if v.kind.is_integral() && (v.lower == f64::NEG_INFINITY || v.upper == f64::INFINITY) {
                return Err(MilpError::Invalid(format!(
                    "integer variable {} ({}) must have finite bounds",
                    i, v.name
                )));
            }
            if !self.objective[i].is_finite() {
                return Err(MilpError::Invalid(format!(
                    "objective coefficient of {} is not finite",
                    v.name
                )));
            }
        }
        if !self.obj_offset.is_finite() {
            return Err(MilpError::Invalid("objective offset is not finite".into()));
        }
        for c in &self.cons {
            if !c.rhs.is_finite() {
                return Err(MilpError::Invalid(format!("row {} has non-finite rhs", c.name)));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.vars.len() {
                    return Err(MilpError::Invalid(format!(
                        "row {} references variable {} out of range",
                        c.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(MilpError::Invalid(format!(
                        "row {} has non-finite coefficient on {}",
                        c.name, self.vars[v.0].name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Result of checking a point against a model.
#[derive(Clone, Debug)]
pub struct PointEvaluation {
    pub objective: f64,
    pub max_violation: f64,
    /// Name of the row or bound with the largest violation, if any.
    pub worst: Option<String>,
    pub integral: bool,
}

impl PointEvaluation {
    pub fn feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol && self.integral
    }
}

/// Objective and worst bound/row/integrality violation of `x`.
pub fn evaluate_point(model: &MilpModel, x: &[f64], int_tol: f64) -> PointEvaluation {
    assert_eq!(x.len(), model.num_vars(), "point dimension mismatch");
    let mut worst = 0.0;
    let mut worst_name = None;
    let mut integral = true;
    for (v, &xv) in model.vars.iter().zip(x) {
        let viol = (v.lower - xv).max(xv - v.upper).max(0.0);
        if viol > worst {
            worst = viol;
            worst_name = Some(v.name.clone());
        }
        if v.kind.is_integral() && (xv - xv.round()).abs() > int_tol {
            integral = false;
        }
    }
    for c in &model.cons {
        let viol = c.violation(x);
        if viol > worst {
            worst = viol;
            worst_name = Some(c.name.clone());
        }
    }
    PointEvaluation {
        objective: model.objective_value(x),
        max_violation: worst,
        worst: worst_name,
        integral,
    }
}
