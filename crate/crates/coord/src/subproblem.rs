use gridplan_core::builder::{build_subproblems, BuildOptions, BuiltModel};
use gridplan_core::Network;
use gridplan_milp::{evaluate_point, solve_milp_with_hint, MilpModel, MilpStatus, SolverConfig, VarId};

use crate::CoordError;

/// One block of the decomposition with its boundary selector `Q`.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub name: String,
    pub built: BuiltModel,
    pub coord: Vec<VarId>,
}

impl Subproblem {
    pub fn new(built: BuiltModel) -> Self {
        Self {
            name: built.model.name.clone(),
            coord: built.atlas.coord_vars(),
            built,
        }
    }

    pub fn model(&self) -> &MilpModel {
        &self.built.model
    }

    pub fn q(&self, x: &[f64]) -> Vec<f64> {
        self.coord.iter().map(|v| x[v.idx()]).collect()
    }

    /// Model objective, tie-break included.
    pub fn f(&self, x: &[f64]) -> f64 {
        self.built.model.objective_value(x)
    }

    pub fn feasible(&self, x: &[f64]) -> bool {
        evaluate_point(&self.built.model, x, 1e-6).feasible(1e-6)
    }

    /// Equipment decisions of `x` as rounded bits.
    pub fn investment_bits(&self, x: &[f64]) -> Vec<bool> {
        self.built.atlas.investment_vars().iter().map(|v| x[v.idx()] > 0.5).collect()
    }
}

/// Backbone first, then sub-areas in order.
pub fn subproblems(net: &Network, opts: &BuildOptions) -> Vec<Subproblem> {
    build_subproblems(net, opts).into_iter().map(Subproblem::new).collect()
}

#[derive(Clone, Debug)]
pub struct DualResult {
    pub x: Vec<f64>,
    pub qx: Vec<f64>,
    pub f: f64,
    /// Lower bound on `min f(x) + w'Qx` over the subproblem: the optimum
    /// when exact, the best bound otherwise.
    pub value: f64,
    pub exact: bool,
}

/// Lagrangian subproblem `min f(x) + w'Qx` over the MILP feasible set.
pub fn evaluate_dual(
    sub: &Subproblem,
    w: &[f64],
    cfg: &SolverConfig,
    hint: Option<&[f64]>,
) -> Result<DualResult, CoordError> {
    assert_eq!(w.len(), sub.coord.len(), "multiplier length");
    let mut m = sub.built.model.clone();
    for (v, &c) in sub.coord.iter().zip(w) {
        m.add_obj(*v, c);
    }
    let sol = solve_milp_with_hint(&m, cfg, hint)?;
    match sol.status {
        MilpStatus::Optimal | MilpStatus::NodeLimit => {
            let exact = sol.status == MilpStatus::Optimal;
            let f = sub.f(&sol.x);
            Ok(DualResult {
                qx: sub.q(&sol.x),
                value: if exact { sol.objective } else { sol.bound },
                x: sol.x,
                f,
                exact,
            })
        }
        s => Err(CoordError::Subproblem {
            name: sub.name.clone(),
            reason: format!("dual evaluation ended with status {:?}", s),
        }),
    }
}
