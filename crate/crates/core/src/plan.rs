//! Decoded planning decisions and the planner's own reliability indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::builder::{BranchRole, BuiltModel, NodeRole, ViewKind};
use crate::error::PlanError;
use crate::network::Network;

/// Equipment and normal-state topology at one stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StagePlan {
    pub stage: usize,
    /// Branch id to the conductor type in service.
    pub conductors: BTreeMap<String, String>,
    /// Conductors installed at this stage.
    pub installed: BTreeMap<String, String>,
    /// Slot id to the transformer type in service.
    pub transformers: BTreeMap<String, String>,
    pub installed_transformers: BTreeMap<String, String>,
    /// Substation nodes in service.
    pub substations: Vec<String>,
    pub built_substations: Vec<String>,
    /// Branches closed in normal operation, sorted.
    pub closed: Vec<String>,
    /// Node id to supplying feeder id in normal operation.
    pub feeder_of: BTreeMap<String, String>,
    /// Boundary quantities per sub-area (decomposed plans only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub boundary: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Plan {
    pub network: String,
    pub stages: Vec<StagePlan>,
}

/// Per-node CIF / CID and per-area SAIDI at one stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageIndices {
    pub cif: BTreeMap<String, f64>,
    pub cid: BTreeMap<String, f64>,
    pub saidi: BTreeMap<String, f64>,
}

fn bit(x: &[f64], v: gridplan_milp::VarId, tol: f64, what: &str) -> Result<bool, PlanError> {
    let val = x[v.0];
    let r = val.round();
    if (val - r).abs() > tol || !(r == 0.0 || r == 1.0) {
        return Err(PlanError::Config(format!("{} is fractional ({})", what, val)));
    }
    Ok(r == 1.0)
}

/// Decodes a solved model. Only real network elements of the view appear
/// in the result; feeder assignment is left empty for sub-area views and
/// filled in when parts are merged.
pub fn extract_plan(net: &Network, built: &BuiltModel, x: &[f64], tol: f64) -> Result<Plan, PlanError> {
    let at = &built.atlas;
    let view = &at.view;
    let mut stages = Vec::new();
    for t in 0..net.stages() {
        let st = &at.stages[t];
        let mut sp = StagePlan {
            stage: t + 1,
            ..Default::default()
        };
        for (b, vb) in view.branches.iter().enumerate() {
            let BranchRole::Real(g) = vb.role else { continue };
            let br = &net.branches[g];
            for (a, ct) in net.catalog.conductors.iter().enumerate() {
                if let Some(v) = at.install[b][a][t] {
                    if bit(x, v, tol, &format!("install {} {}", br.id, ct.id))? {
                        sp.installed.insert(br.id.clone(), ct.id.clone());
                    }
                }
            }
            if let Some(a) = alive_type(net, built, x, b, t) {
                sp.conductors.insert(br.id.clone(), net.catalog.conductors[a].id.clone());
            }
            let s = st.scenarios[0].s[b].unwrap();
            if bit(x, s, tol, &format!("switch {}", br.id))? {
                sp.closed.push(br.id.clone());
            }
        }
        if !matches!(view.kind, ViewKind::SubArea(_)) {
            for (si, slot) in net.slots.iter().enumerate() {
                for (a, tt) in net.catalog.transformers.iter().enumerate() {
                    if let Some(v) = at.tr_install[si][a][t] {
                        if bit(x, v, tol, &format!("transformer {}", slot.id))? {
                            sp.installed_transformers.insert(slot.id.clone(), tt.id.clone());
                        }
                    }
                }
                if let Some(a) = transformer_type(net, &sp_history(&stages, &sp), si, t) {
                    sp.transformers.insert(slot.id.clone(), net.catalog.transformers[a].id.clone());
                }
            }
            for (n, vn) in view.nodes.iter().enumerate() {
                if vn.role != NodeRole::Source {
                    continue;
                }
                let g = vn.global.unwrap();
                let sub = net.nodes[g].substation.as_ref().unwrap();
                let mut alive = sub.existing;
                for tau in 0..=t {
                    if let Some(v) = at.sub_build[n][tau] {
                        let built_now = bit(x, v, tol, &format!("substation {}", vn.id))?;
                        if built_now && tau == t {
                            sp.built_substations.push(vn.id.clone());
                        }
                        alive |= built_now;
                    }
                }
                if alive {
                    sp.substations.push(vn.id.clone());
                }
            }
        }
        sp.closed.sort();
        if view.kind == ViewKind::Centralized {
            sp.feeder_of = feeder_assignment(net, &sp)?;
        }
        stages.push(sp);
    }
    Ok(Plan {
        network: net.name.clone(),
        stages,
    })
}

// Installed-transformer history up to and including the stage being decoded.
fn sp_history<'a>(done: &'a [StagePlan], cur: &'a StagePlan) -> Vec<&'a StagePlan> {
    done.iter().chain(std::iter::once(cur)).collect()
}

/// Transformer type in service at slot `si`, stage `t`.
fn transformer_type(net: &Network, hist: &[&StagePlan], si: usize, t: usize) -> Option<usize> {
    let slot = &net.slots[si];
    let stages = net.stages();
    for (tau, sp) in hist.iter().enumerate().rev() {
        if let Some(id) = sp.installed_transformers.get(&slot.id) {
            let a = net.catalog.transformers.iter().position(|x| &x.id == id)?;
            let life = net.catalog.transformers[a].lifespan;
            if crate::network::aging_vector(life, tau + 1, stages)[t] == 1 {
                return Some(a);
            }
        }
    }
    let a = slot.existing?;
    (crate::network::aging_vector(slot.existing_life, 0, stages)[t] == 1).then_some(a)
}

fn alive_type(net: &Network, built: &BuiltModel, x: &[f64], b: usize, t: usize) -> Option<usize> {
    let at = &built.atlas;
    let BranchRole::Real(g) = at.view.branches[b].role else {
        return None;
    };
    let br = &net.branches[g];
    let stages = net.stages();
    for a in 0..net.catalog.conductors.len() {
        let life = net.catalog.conductors[a].lifespan;
        for tau in 0..=t {
            if let Some(v) = at.install[b][a][tau] {
                if x[v.0] > 0.5 && crate::network::aging_vector(life, tau + 1, stages)[t] == 1 {
                    return Some(a);
                }
            }
        }
        if br.existing == Some(a) && crate::network::aging_vector(br.existing_life, 0, stages)[t] == 1 {
            return Some(a);
        }
    }
    None
}

/// Traces the closed branches from every feeder head; fails unless every
/// non-source node is reached exactly once.
pub fn feeder_assignment(net: &Network, sp: &StagePlan) -> Result<BTreeMap<String, String>, PlanError> {
    let closed: Vec<usize> = sp
        .closed
        .iter()
        .map(|id| {
            net.branch_idx(id)
                .ok_or_else(|| PlanError::Config(format!("plan names unknown branch {}", id)))
        })
        .collect::<Result<_, _>>()?;
    let mut owner: Vec<Option<usize>> = vec![None; net.nodes.len()];
    let mut used = vec![false; net.branches.len()];
    for (fi, f) in net.feeders.iter().enumerate() {
        if !closed.contains(&f.head) {
            continue;
        }
        let hb = &net.branches[f.head];
        let start = if net.is_source(hb.from) { hb.to } else { hb.from };
        used[f.head] = true;
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if net.is_source(n) {
                return Err(PlanError::Config(format!("feeder {} reaches a second source", f.id)));
            }
            if owner[n].is_some() {
                return Err(PlanError::Config(format!("node {} is fed twice", net.nodes[n].id)));
            }
            owner[n] = Some(fi);
            for &b in &closed {
                if used[b] || !net.branches[b].touches(n) {
                    continue;
                }
                used[b] = true;
                stack.push(net.branches[b].other(n));
            }
        }
    }
    let mut out = BTreeMap::new();
    for (n, node) in net.nodes.iter().enumerate() {
        if net.is_source(n) {
            continue;
        }
        match owner[n] {
            Some(fi) => {
                out.insert(node.id.clone(), net.feeders[fi].id.clone());
            }
            None => {
                return Err(PlanError::Config(format!("node {} is not supplied", node.id)));
            }
        }
    }
    if closed.iter().any(|&b| !used[b]) {
        return Err(PlanError::Config("closed branch outside every feeder".into()));
    }
    Ok(out)
}

/// Combines the backbone plan with sub-area plans into a network plan.
pub fn merge_plans(net: &Network, parts: &[Plan]) -> Result<Plan, PlanError> {
    let mut out = Plan {
        network: net.name.clone(),
        stages: Vec::new(),
    };
    for t in 0..net.stages() {
        let mut sp = StagePlan {
            stage: t + 1,
            ..Default::default()
        };
        for p in parts {
            let s = &p.stages[t];
            sp.conductors.extend(s.conductors.clone());
            sp.installed.extend(s.installed.clone());
            sp.transformers.extend(s.transformers.clone());
            sp.installed_transformers.extend(s.installed_transformers.clone());
            sp.substations.extend(s.substations.iter().cloned());
            sp.built_substations.extend(s.built_substations.iter().cloned());
            sp.closed.extend(s.closed.iter().cloned());
            sp.boundary.extend(s.boundary.clone());
        }
        sp.closed.sort();
        sp.closed.dedup();
        sp.substations.sort();
        sp.built_substations.sort();
        sp.feeder_of = feeder_assignment(net, &sp)?;
        out.stages.push(sp);
    }
    Ok(out)
}

/// Reliability indices recomputed arithmetically from the solution's fault
/// flags and failure rates. Node ids are the view's ids; equivalent load nodes
/// are included. Fails when the model's own CIF / CID variables disagree by
/// more than `tol`.
pub fn internal_reliability_indices(
    net: &Network,
    built: &BuiltModel,
    x: &[f64],
    tol: f64,
) -> Result<Vec<StageIndices>, PlanError> {
    let at = &built.atlas;
    let view = &at.view;
    let mut out = Vec::new();
    for t in 0..net.stages() {
        let st = &at.stages[t];
        let nn = view.nodes.len();
        let mut cif = vec![0.0; nn];
        let mut cid = vec![0.0; nn];
        for sv in st.scenarios.iter().skip(1) {
            let f = sv.fault.unwrap();
            let vb = &view.branches[f];
            let lam = x[st.line_rate[f].unwrap().0];
            for i in 0..nn {
                let (Some(p), Some(q)) = (sv.p[i], sv.q[i]) else { continue };
                let (p, q) = (x[p.0].round(), x[q.0].round());
                cif[i] += lam * p;
                match vb.role {
                    BranchRole::Real(_) => {
                        cid[i] += lam * vb.switch_time_h * p + lam * (vb.repair_time_h - vb.switch_time_h) * q;
                    }
                    BranchRole::Eob(_) => cid[i] += x[st.eob_duration.unwrap().0] * p,
                }
            }
        }
        let mut si = StageIndices::default();
        for i in view.non_source() {
            let id = &view.nodes[i].id;
            let mf = x[st.cif[i].unwrap().0];
            let md = x[st.cid[i].unwrap().0];
            if (mf - cif[i]).abs() > tol || (md - cid[i]).abs() > tol {
                return Err(PlanError::Config(format!(
                    "stage {} node {}: model CIF/CID ({}, {}) differ from recomputed ({}, {})",
                    t + 1,
                    id,
                    mf,
                    md,
                    cif[i],
                    cid[i]
                )));
            }
            si.cif.insert(id.clone(), cif[i]);
            si.cid.insert(id.clone(), cid[i]);
        }
        for a in &view.areas {
            let mut num = 0.0;
            let mut den = 0.0;
            for &i in &a.nodes {
                if let Some(g) = view.nodes[i].global {
                    let nc = net.nodes[g].customers as f64;
                    num += nc * cid[i];
                    den += nc;
                }
            }
            si.saidi.insert(a.id.clone(), if den > 0.0 { num / den } else { 0.0 });
        }
        out.push(si);
    }
    Ok(out)
}

/// Customer-weighted mean CID.
pub fn saidi(customers: &[f64], cid: &[f64]) -> f64 {
    let den: f64 = customers.iter().sum();
    if den <= 0.0 {
        return 0.0;
    }
    customers.iter().zip(cid).map(|(n, d)| n * d).sum::<f64>() / den
}
