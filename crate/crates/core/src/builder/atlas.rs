//! Semantic index over the variables of a built planning model.

use gridplan_milp::VarId;
use serde::{Deserialize, Serialize};

use super::view::View;

/// Variables of one operating scenario (normal state or one branch fault) at one stage.
#[derive(Clone, Debug, Default)]
pub struct ScenarioVars {
    /// Faulted local branch; `None` for the normal state.
    pub fault: Option<usize>,
    /// Switch state per local branch (absent on the faulted branch).
    pub s: Vec<Option<VarId>>,
    pub p_flow: Vec<Option<VarId>>,
    pub q_flow: Vec<Option<VarId>>,
    /// Squared voltage per local node (sources share their stage variable).
    pub u: Vec<VarId>,
    /// Interruption flag per node (only nodes a fault can reach).
    pub p: Vec<Option<VarId>>,
    /// Not-restored flag per node.
    pub q: Vec<Option<VarId>>,
}

#[derive(Clone, Debug, Default)]
pub struct StageAtlas {
    /// Index 0 is the normal state.
    pub scenarios: Vec<ScenarioVars>,
    /// Feeder affiliation, `[feeder][node]` and `[feeder][branch]`.
    pub h_node: Vec<Vec<Option<VarId>>>,
    pub h_branch: Vec<Vec<Option<VarId>>>,
    /// Conductor in service, capacity and failure rate per local branch.
    pub line_alive: Vec<Option<VarId>>,
    pub line_cap: Vec<Option<VarId>>,
    pub line_rate: Vec<Option<VarId>>,
    /// Outage duration carried by the equivalent branch (sub-area views).
    pub eob_duration: Option<VarId>,
    /// Per transformer slot (network index).
    pub tr_alive: Vec<Option<VarId>>,
    pub tr_cap: Vec<Option<VarId>>,
    pub u_source: Vec<Option<VarId>>,
    pub cif: Vec<Option<VarId>>,
    pub cid: Vec<Option<VarId>>,
    /// Equivalent-load demand per local node (backbone views).
    pub eln_p: Vec<Option<VarId>>,
    pub eln_q: Vec<Option<VarId>>,
    /// Boundary quantities exchanged with neighbouring subproblems.
    pub coord: Vec<VarId>,
}

/// Linear pieces of the objective, kept apart for cost reporting.
#[derive(Clone, Debug, Default)]
pub struct CostVectors {
    pub investment: Vec<(VarId, f64)>,
    pub maintenance: Vec<(VarId, f64)>,
    pub maintenance_const: f64,
    pub eens: Vec<(VarId, f64)>,
    /// Small weight on interruption flags that resolves ties toward the
    /// physically implied values; excluded from reported cost.
    pub tie_break: Vec<(VarId, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub investment: f64,
    pub maintenance: f64,
    pub eens: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn add(&self, o: &CostBreakdown) -> CostBreakdown {
        CostBreakdown {
            investment: self.investment + o.investment,
            maintenance: self.maintenance + o.maintenance,
            eens: self.eens + o.eens,
            total: self.total + o.total,
        }
    }
}

impl CostVectors {
    pub fn breakdown(&self, x: &[f64]) -> CostBreakdown {
        let dot = |v: &[(VarId, f64)]| v.iter().map(|&(id, c)| c * x[id.0]).sum::<f64>();
        let investment = dot(&self.investment);
        let maintenance = dot(&self.maintenance) + self.maintenance_const;
        let eens = dot(&self.eens);
        CostBreakdown {
            investment,
            maintenance,
            eens,
            total: investment + maintenance + eens,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Atlas {
    pub view: View,
    pub stages: Vec<StageAtlas>,
    /// Conductor installation, `[local branch][type][stage]`.
    pub install: Vec<Vec<Vec<Option<VarId>>>>,
    /// Transformer installation, `[slot][type][stage]`.
    pub tr_install: Vec<Vec<Vec<Option<VarId>>>>,
    /// Substation construction, `[local node][stage]`.
    pub sub_build: Vec<Vec<Option<VarId>>>,
    pub cost: CostVectors,
    /// Component names of one stage's boundary vector.
    pub coord_labels: Vec<String>,
}

impl Atlas {
    /// Boundary vector over all stages, stage-major.
    pub fn coord_vars(&self) -> Vec<VarId> {
        self.stages.iter().flat_map(|s| s.coord.iter().copied()).collect()
    }

    /// Every binary deciding equipment (as opposed to operation).
    pub fn investment_vars(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self
            .install
            .iter()
            .chain(&self.tr_install)
            .flatten()
            .flatten()
            .flatten()
            .copied()
            .collect();
        v.extend(self.sub_build.iter().flatten().flatten().copied());
        v.sort();
        v
    }
}
