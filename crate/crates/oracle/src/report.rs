use std::collections::BTreeMap;
use std::fmt::Write as _;

use gridplan_core::{Horizon, Network, Plan};
use serde::{Deserialize, Serialize};

use crate::restore::{simulate_fault, StageTopology};
use crate::OracleError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaultDetail {
    pub branch: String,
    pub rate: f64,
    pub switch_time_h: f64,
    pub repair_time_h: f64,
    pub affected: Vec<String>,
    pub restored: Vec<String>,
    pub unrestored: Vec<String>,
    /// Branches closed after reconfiguration.
    pub restoration: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageReliability {
    pub stage: usize,
    pub cif: BTreeMap<String, f64>,
    pub cid: BTreeMap<String, f64>,
    /// Per SAIDI area: "system" without a partition, otherwise "backbone"
    /// and each sub-area id.
    pub area_saidi: BTreeMap<String, f64>,
    /// Over all load nodes.
    pub system_saidi: f64,
    pub faults: Vec<FaultDetail>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReliabilityReport {
    pub network: String,
    pub stages: Vec<StageReliability>,
}

impl ReliabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `stage,node,cif,cid` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,node,cif,cid\n");
        for s in &self.stages {
            for (id, f) in &s.cif {
                let _ = writeln!(out, "{},{},{},{}", s.stage, id, f, s.cid[id]);
            }
        }
        out
    }
}

fn weighted(net: &Network, nodes: impl Iterator<Item = usize>, cid: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for n in nodes {
        let nc = net.nodes[n].customers as f64;
        num += nc * cid[n];
        den += nc;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Indices for one decoded stage.
pub fn evaluate_stage(net: &Network, topo: &StageTopology) -> Result<StageReliability, OracleError> {
    let nn = net.nodes.len();
    let mut cif = vec![0.0; nn];
    let mut cid = vec![0.0; nn];
    let mut faults = Vec::new();
    let ids = |mask: &[bool]| -> Vec<String> {
        (0..mask.len()).filter(|&i| mask[i]).map(|i| net.nodes[i].id.clone()).collect()
    };
    for b in 0..net.branches.len() {
        if topo.conductor[b].is_none() {
            continue;
        }
        let out = simulate_fault(net, topo, b)?;
        let br = &net.branches[b];
        let lam = topo.rate(net, b);
        for n in 0..nn {
            let p = if out.affected[n] { 1.0 } else { 0.0 };
            let q = if out.unrestored[n] { 1.0 } else { 0.0 };
            cif[n] += lam * p;
            cid[n] += lam * br.switch_time_h * p + lam * (br.repair_time_h - br.switch_time_h) * q;
        }
        let restored: Vec<bool> = (0..nn).map(|n| out.affected[n] && !out.unrestored[n]).collect();
        faults.push(FaultDetail {
            branch: br.id.clone(),
            rate: lam,
            switch_time_h: br.switch_time_h,
            repair_time_h: br.repair_time_h,
            affected: ids(&out.affected),
            restored: ids(&restored),
            unrestored: ids(&out.unrestored),
            restoration: (0..net.branches.len())
                .filter(|&c| out.closed[c])
                .map(|c| net.branches[c].id.clone())
                .collect(),
        });
    }
    let loads: Vec<usize> = (0..nn).filter(|&n| net.nodes[n].substation.is_none()).collect();
    let mut area_saidi = BTreeMap::new();
    match &net.partition {
        None => {
            area_saidi.insert("system".to_string(), weighted(net, loads.iter().copied(), &cid));
        }
        Some(p) => {
            let bb = p.backbone.iter().copied().filter(|&n| net.nodes[n].substation.is_none());
            area_saidi.insert("backbone".to_string(), weighted(net, bb, &cid));
            for s in &p.sub_areas {
                area_saidi.insert(s.id.clone(), weighted(net, s.nodes.iter().copied(), &cid));
            }
        }
    }
    Ok(StageReliability {
        stage: topo.stage,
        cif: loads.iter().map(|&n| (net.nodes[n].id.clone(), cif[n])).collect(),
        cid: loads.iter().map(|&n| (net.nodes[n].id.clone(), cid[n])).collect(),
        system_saidi: weighted(net, loads.iter().copied(), &cid),
        area_saidi,
        faults,
    })
}

pub fn evaluate_plan_reliability(net: &Network, plan: &Plan) -> Result<ReliabilityReport, OracleError> {
    if plan.stages.len() != net.stages() {
        return Err(OracleError::InvalidPlan(format!(
            "plan has {} stages, network horizon {}",
            plan.stages.len(),
            net.stages()
        )));
    }
    let stages = plan
        .stages
        .iter()
        .map(|sp| evaluate_stage(net, &StageTopology::from_plan(net, sp)?))
        .collect::<Result<_, _>>()?;
    Ok(ReliabilityReport {
        network: plan.network.clone(),
        stages,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AreaCheck {
    pub stage: usize,
    pub area: String,
    pub saidi: f64,
    pub limit: f64,
    /// `limit - saidi`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RequirementCheck {
    pub pass: bool,
    pub areas: Vec<AreaCheck>,
}

/// SAIDI of every limited area against its limit, inclusive, with 1e-6 slack.
pub fn check_requirements(report: &ReliabilityReport, horizon: &Horizon) -> RequirementCheck {
    let mut areas = Vec::new();
    for s in &report.stages {
        for (area, &limit) in &horizon.saidi_limit {
            let saidi = match s.area_saidi.get(area) {
                Some(&v) => v,
                None if area == "system" => s.system_saidi,
                None => continue,
            };
            areas.push(AreaCheck {
                stage: s.stage,
                area: area.clone(),
                saidi,
                limit,
                margin: limit - saidi,
                pass: saidi <= limit + 1e-6,
            });
        }
    }
    RequirementCheck {
        pass: areas.iter().all(|a| a.pass),
        areas,
    }
}
