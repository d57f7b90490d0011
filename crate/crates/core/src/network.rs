//! Network data: JSON schema, validation, indexing, partition and horizon helpers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{NetworkError, Violation};

fn id_string<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        S(String),
        I(i64),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::S(s) => s,
        Raw::I(i) => i.to_string(),
    })
}

/// Serialized form of a network file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkSpec {
    #[serde(default)]
    pub name: String,
    /// Base power used to convert flows to per-unit voltage drops.
    #[serde(default = "default_base")]
    pub base_mva: f64,
    #[serde(default)]
    pub voltage: VoltageLimits,
    pub nodes: Vec<NodeSpec>,
    pub branches: Vec<BranchSpec>,
    #[serde(default)]
    pub transformer_slots: Vec<TransformerSlotSpec>,
    pub feeders: Vec<FeederSpec>,
    pub catalog: Catalog,
    pub horizon: HorizonSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
}

fn default_base() -> f64 {
    10.0
}

/// Limits on squared voltage magnitude, p.u.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VoltageLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for VoltageLimits {
    fn default() -> Self {
        Self { min: 0.81, max: 1.21 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeSpec {
    #[serde(deserialize_with = "id_string")]
    pub id: String,
    /// Peak active load per stage, MW.
    #[serde(default)]
    pub load_p: Vec<f64>,
    /// Peak reactive load per stage, Mvar.
    #[serde(default)]
    pub load_q: Vec<f64>,
    #[serde(default)]
    pub customers: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substation: Option<SubstationSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubstationSpec {
    #[serde(default)]
    pub candidate: bool,
    #[serde(default)]
    pub existing: bool,
    #[serde(default)]
    pub invest_cost: f64,
    #[serde(default)]
    pub maint_cost: f64,
    pub max_transformers: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchSpec {
    /// Defaults to `"<from>-<to>"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(deserialize_with = "id_string")]
    pub from: String,
    #[serde(deserialize_with = "id_string")]
    pub to: String,
    pub length_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_conductor: Option<String>,
    /// Stages the existing conductor remains in service; defaults to the whole horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_life: Option<usize>,
    pub switch_time_h: f64,
    pub repair_time_h: f64,
}

impl BranchSpec {
    pub fn key(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.from, self.to))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransformerSlotSpec {
    pub id: String,
    #[serde(deserialize_with = "id_string")]
    pub node: String,
    pub outlet_branch: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_life: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeederSpec {
    pub id: String,
    pub head_branch: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Catalog {
    pub conductors: Vec<ConductorType>,
    #[serde(default)]
    pub transformers: Vec<TransformerType>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConductorType {
    pub id: String,
    pub capacity_mva: f64,
    /// Resistance and reactance, p.u. per km on the network base.
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub x: f64,
    /// Faults per km per year.
    pub failure_rate: f64,
    /// Investment cost per km.
    pub invest_cost: f64,
    /// Maintenance cost per km per year.
    #[serde(default)]
    pub maint_cost: f64,
    /// Service life in stages.
    #[serde(default = "default_life")]
    pub lifespan: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransformerType {
    pub id: String,
    pub capacity_mva: f64,
    pub invest_cost: f64,
    #[serde(default)]
    pub maint_cost: f64,
    #[serde(default = "default_life")]
    pub lifespan: usize,
}

fn default_life() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HorizonSpec {
    pub stages: usize,
    /// First year of every stage followed by the year after the last stage
    /// (length `stages + 1`).
    pub stage_years: Vec<u32>,
    pub interest_rate: f64,
    /// Cost per MWh of expected energy not supplied.
    pub eens_weight: f64,
    /// SAIDI limit per area id (hours per customer per year).
    #[serde(default)]
    pub saidi_limit: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartitionSpec {
    pub backbone: Vec<String>,
    pub sub_areas: Vec<SubAreaSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubAreaSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub nodes: Vec<String>,
    pub boundary_branch: String,
}

// ---------------------------------------------------------------------------
// Indexed form

#[derive(Clone, Debug)]
pub struct Substation {
    pub candidate: bool,
    pub existing: bool,
    pub invest_cost: f64,
    pub maint_cost: f64,
    pub max_transformers: u32,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: String,
    pub load_p: Vec<f64>,
    pub load_q: Vec<f64>,
    pub customers: u32,
    pub substation: Option<Substation>,
}

impl Node {
    pub fn is_source(&self) -> bool {
        self.substation.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length_km: f64,
    pub existing: Option<usize>,
    pub existing_life: usize,
    pub switch_time_h: f64,
    pub repair_time_h: f64,
}

impl Branch {
    pub fn other(&self, n: usize) -> usize {
        if self.from == n {
            self.to
        } else {
            self.from
        }
    }

    pub fn touches(&self, n: usize) -> bool {
        self.from == n || self.to == n
    }
}

#[derive(Clone, Debug)]
pub struct TransformerSlot {
    pub id: String,
    pub node: usize,
    pub outlet: usize,
    pub existing: Option<usize>,
    pub existing_life: usize,
}

#[derive(Clone, Debug)]
pub struct Feeder {
    pub id: String,
    pub head: usize,
}

#[derive(Clone, Debug)]
pub struct SubArea {
    pub id: String,
    pub nodes: Vec<usize>,
    pub boundary: usize,
    /// Sub-area end of the boundary branch.
    pub entry: usize,
    /// Backbone end of the boundary branch.
    pub attach: usize,
}

#[derive(Clone, Debug)]
pub struct Partition {
    pub backbone: Vec<usize>,
    pub sub_areas: Vec<SubArea>,
    /// Sub-area index per node, `None` for backbone nodes.
    pub area_of_node: Vec<Option<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchArea {
    Backbone,
    Boundary(usize),
    Internal(usize),
}

#[derive(Clone, Debug)]
pub struct Horizon {
    pub stages: usize,
    pub stage_years: Vec<u32>,
    pub interest_rate: f64,
    pub eens_weight: f64,
    pub saidi_limit: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub voltage: VoltageLimits,
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
    pub slots: Vec<TransformerSlot>,
    pub feeders: Vec<Feeder>,
    pub catalog: Catalog,
    pub horizon: Horizon,
    pub partition: Option<Partition>,
    node_index: HashMap<String, usize>,
    branch_index: HashMap<String, usize>,
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} nodes, {} branches, {} stages, {} sub-areas",
            self.name,
            self.nodes.len(),
            self.branches.len(),
            self.horizon.stages,
            self.partition.as_ref().map_or(0, |p| p.sub_areas.len())
        )
    }
}

impl Network {
    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetworkError::Io(format!("{}: {}", path.display(), e)))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let spec: NetworkSpec =
            serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        Self::from_spec(spec)
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn branch_idx(&self, id: &str) -> Option<usize> {
        self.branch_index.get(id).copied()
    }

    pub fn stages(&self) -> usize {
        self.horizon.stages
    }

    pub fn is_source(&self, n: usize) -> bool {
        self.nodes[n].is_source()
    }

    pub fn branch_area(&self, b: usize) -> BranchArea {
        let Some(p) = &self.partition else {
            return BranchArea::Backbone;
        };
        let br = &self.branches[b];
        if let Some(k) = p.sub_areas.iter().position(|s| s.boundary == b) {
            return BranchArea::Boundary(k);
        }
        match (p.area_of_node[br.from], p.area_of_node[br.to]) {
            (Some(a), _) | (_, Some(a)) => BranchArea::Internal(a),
            _ => BranchArea::Backbone,
        }
    }

    /// Largest conductor failure rate per km.
    pub fn max_failure_rate(&self) -> f64 {
        self.catalog
            .conductors
            .iter()
            .map(|c| c.failure_rate)
            .fold(0.0, f64::max)
    }

    pub fn max_conductor_capacity(&self) -> f64 {
        self.catalog
            .conductors
            .iter()
            .map(|c| c.capacity_mva)
            .fold(0.0, f64::max)
    }

    /// SAIDI limit for an area id; `None` means unconstrained.
    pub fn saidi_limit(&self, area: &str) -> Option<f64> {
        self.horizon.saidi_limit.get(area).copied()
    }

    /// Parses and validates; every problem found is reported together.
    pub fn from_spec(spec: NetworkSpec) -> Result<Self, NetworkError> {
        let mut v: Vec<Violation> = Vec::new();
        let stages = spec.horizon.stages;
        if stages == 0 {
            v.push(Violation::new("horizon", "stages must be at least 1"));
        }
        if spec.horizon.stage_years.len() != stages + 1 {
            v.push(Violation::new(
                "horizon",
                format!(
                    "stageYears must list {} entries (stage starts plus end year), got {}",
                    stages + 1,
                    spec.horizon.stage_years.len()
                ),
            ));
        } else if spec.horizon.stage_years.windows(2).any(|w| w[1] <= w[0]) {
            v.push(Violation::new("horizon", "stageYears must be strictly increasing"));
        }
        if !(spec.horizon.interest_rate >= 0.0) || spec.horizon.interest_rate.is_infinite() {
            v.push(Violation::new("horizon", "interestRate must be finite and non-negative"));
        }
        if !(spec.horizon.eens_weight >= 0.0) {
            v.push(Violation::new("horizon", "eensWeight must be non-negative"));
        }
        if !(spec.base_mva > 0.0) {
            v.push(Violation::new("baseMva", "must be positive"));
        }
        if !(spec.voltage.min > 0.0 && spec.voltage.min <= spec.voltage.max) {
            v.push(Violation::new("voltage", "need 0 < min <= max"));
        }
        if spec.catalog.conductors.is_empty() {
            v.push(Violation::new("catalog", "at least one conductor type is required"));
        }
        let mut seen = HashSet::new();
        for c in &spec.catalog.conductors {
            if !seen.insert(c.id.clone()) {
                v.push(Violation::new(format!("conductor {}", c.id), "duplicate id"));
            }
            if !(c.capacity_mva > 0.0) || c.failure_rate < 0.0 || c.invest_cost < 0.0 || c.lifespan == 0 {
                v.push(Violation::new(
                    format!("conductor {}", c.id),
                    "capacity must be positive; rate and cost non-negative; lifespan >= 1",
                ));
            }
        }
        for t in &spec.catalog.transformers {
            if !(t.capacity_mva > 0.0) || t.invest_cost < 0.0 || t.lifespan == 0 {
                v.push(Violation::new(format!("transformer type {}", t.id), "invalid data"));
            }
        }
        let conductor_idx: HashMap<&str, usize> = spec
            .catalog
            .conductors
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect();
        let transformer_idx: HashMap<&str, usize> = spec
            .catalog
            .transformers
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect();

        let mut node_index = HashMap::new();
        let mut nodes = Vec::new();
        for n in &spec.nodes {
            if node_index.insert(n.id.clone(), nodes.len()).is_some() {
                v.push(Violation::new(format!("node {}", n.id), "duplicate id"));
            }
            let mut lp = n.load_p.clone();
            let mut lq = n.load_q.clone();
            if lp.is_empty() {
                lp = vec![0.0; stages];
            }
            if lq.is_empty() {
                lq = vec![0.0; stages];
            }
            if lp.len() != stages || lq.len() != stages {
                v.push(Violation::new(
                    format!("node {}", n.id),
                    format!("loadP/loadQ must have {} entries", stages),
                ));
            }
            if lp.iter().chain(&lq).any(|x| !(x.is_finite() && *x >= 0.0)) {
                v.push(Violation::new(format!("node {}", n.id), "loads must be finite and non-negative"));
            }
            let substation = n.substation.as_ref().map(|s| Substation {
                candidate: s.candidate || s.existing,
                existing: s.existing,
                invest_cost: s.invest_cost,
                maint_cost: s.maint_cost,
                max_transformers: s.max_transformers,
            });
            if substation.is_some() && (lp.iter().any(|&x| x > 0.0) || n.customers > 0) {
                v.push(Violation::new(
                    format!("node {}", n.id),
                    "substation nodes cannot carry load or customers",
                ));
            }
            nodes.push(Node {
                id: n.id.clone(),
                load_p: lp,
                load_q: lq,
                customers: n.customers,
                substation,
            });
        }

        let mut branch_index = HashMap::new();
        let mut branches = Vec::new();
        let mut pairs = HashSet::new();
        for b in &spec.branches {
            let key = b.key();
            let from = node_index.get(&b.from).copied();
            let to = node_index.get(&b.to).copied();
            if from.is_none() {
                v.push(Violation::new(format!("branch {}", key), format!("references unknown node \"{}\"", b.from)));
            }
            if to.is_none() {
                v.push(Violation::new(format!("branch {}", key), format!("references unknown node \"{}\"", b.to)));
            }
            if b.from == b.to {
                v.push(Violation::new(format!("branch {}", key), "self-loop"));
            }
            if !(b.length_km > 0.0) {
                v.push(Violation::new(format!("branch {}", key), "lengthKm must be positive"));
            }
            if !(b.switch_time_h >= 0.0 && b.repair_time_h >= b.switch_time_h) {
                v.push(Violation::new(
                    format!("branch {}", key),
                    "need 0 <= switchTimeH <= repairTimeH",
                ));
            }
            let existing = match &b.existing_conductor {
                Some(c) => match conductor_idx.get(c.as_str()) {
                    Some(&i) => Some(i),
                    None => {
                        v.push(Violation::new(format!("branch {}", key), format!("unknown conductor type \"{}\"", c)));
                        None
                    }
                },
                None => None,
            };
            if branch_index.insert(key.clone(), branches.len()).is_some() {
                v.push(Violation::new(format!("branch {}", key), "duplicate id"));
            }
            if let (Some(f), Some(t)) = (from, to) {
                if !pairs.insert((f.min(t), f.max(t))) {
                    v.push(Violation::new(format!("branch {}", key), "parallel branch between the same nodes"));
                }
                branches.push(Branch {
                    id: key,
                    from: f,
                    to: t,
                    length_km: b.length_km,
                    existing,
                    existing_life: b.existing_life.unwrap_or(stages),
                    switch_time_h: b.switch_time_h,
                    repair_time_h: b.repair_time_h,
                });
            }
        }
        if !v.is_empty() {
            return Err(NetworkError::Invalid(v));
        }

        let mut slots = Vec::new();
        for s in &spec.transformer_slots {
            let node = node_index.get(&s.node).copied();
            let outlet = branch_index.get(&s.outlet_branch).copied();
            match (node, outlet) {
                (Some(n), Some(o)) => {
                    if nodes[n].substation.is_none() {
                        v.push(Violation::new(format!("transformer slot {}", s.id), "node is not a substation"));
                    }
                    if !branches[o].touches(n) {
                        v.push(Violation::new(format!("transformer slot {}", s.id), "outlet branch is not incident to its node"));
                    }
                    let existing = match &s.existing_type {
                        Some(t) => match transformer_idx.get(t.as_str()) {
                            Some(&i) => Some(i),
                            None => {
                                v.push(Violation::new(format!("transformer slot {}", s.id), format!("unknown transformer type \"{}\"", t)));
                                None
                            }
                        },
                        None => None,
                    };
                    if existing.is_some() && !nodes[n].substation.as_ref().map_or(false, |s| s.existing) {
                        v.push(Violation::new(format!("transformer slot {}", s.id), "existing transformer at a substation that is not existing"));
                    }
                    slots.push(TransformerSlot {
                        id: s.id.clone(),
                        node: n,
                        outlet: o,
                        existing,
                        existing_life: s.existing_life.unwrap_or(stages),
                    });
                }
                _ => v.push(Violation::new(format!("transformer slot {}", s.id), "unknown node or outlet branch")),
            }
        }
        let mut feeders = Vec::new();
        for f in &spec.feeders {
            match branch_index.get(&f.head_branch) {
                Some(&h) => {
                    let br = &branches[h];
                    let src = [br.from, br.to].iter().filter(|&&n| nodes[n].is_source()).count();
                    if src != 1 {
                        v.push(Violation::new(format!("feeder {}", f.id), "head branch must join exactly one substation node"));
                    }
                    if slots.iter().filter(|s| s.outlet == h).count() != 1 {
                        v.push(Violation::new(format!("feeder {}", f.id), "head branch must be the outlet of exactly one transformer slot"));
                    }
                    feeders.push(Feeder { id: f.id.clone(), head: h });
                }
                None => v.push(Violation::new(format!("feeder {}", f.id), format!("unknown head branch \"{}\"", f.head_branch))),
            }
        }
        for (bi, b) in branches.iter().enumerate() {
            if (nodes[b.from].is_source() || nodes[b.to].is_source()) && !feeders.iter().any(|f| f.head == bi) {
                v.push(Violation::new(format!("branch {}", b.id), "branches at a substation must be feeder heads"));
            }
        }
        if feeders.is_empty() {
            v.push(Violation::new("feeders", "at least one feeder is required"));
        }

        let partition = match &spec.partition {
            None => None,
            Some(p) => build_partition(p, &nodes, &branches, &node_index, &branch_index, &mut v),
        };
        let mut limits = spec.horizon.saidi_limit.clone();
        for (k, l) in &limits {
            if !(*l >= 0.0) {
                v.push(Violation::new(format!("saidiLimit {}", k), "must be non-negative"));
            }
        }
        if let Some(p) = &partition {
            for a in &p.sub_areas {
                if limits.get(&a.id).is_none() {
                    if let Some(&sys) = spec.horizon.saidi_limit.get("system") {
                        limits.insert(a.id.clone(), sys);
                    }
                }
            }
        }
        if !v.is_empty() {
            return Err(NetworkError::Invalid(v));
        }
        Ok(Network {
            name: spec.name.clone(),
            base_mva: spec.base_mva,
            voltage: spec.voltage,
            nodes,
            branches,
            slots,
            feeders,
            catalog: spec.catalog.clone(),
            horizon: Horizon {
                stages,
                stage_years: spec.horizon.stage_years.clone(),
                interest_rate: spec.horizon.interest_rate,
                eens_weight: spec.horizon.eens_weight,
                saidi_limit: limits,
            },
            partition,
            node_index,
            branch_index,
        })
    }

    /// SHA-256 of the canonical JSON form, hex-encoded.
    pub fn fingerprint(spec_json: &str) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(spec_json.as_bytes());
        h.finalize().iter().map(|b| format!("{:02x}", b)).collect()
    }
}

fn build_partition(
    p: &PartitionSpec,
    nodes: &[Node],
    branches: &[Branch],
    node_index: &HashMap<String, usize>,
    branch_index: &HashMap<String, usize>,
    v: &mut Vec<Violation>,
) -> Option<Partition> {
    let mut area_of_node: Vec<Option<Option<usize>>> = vec![None; nodes.len()];
    let before = v.len();
    let mut backbone = Vec::new();
    for id in &p.backbone {
        match node_index.get(id) {
            Some(&n) => {
                if area_of_node[n].is_some() {
                    v.push(Violation::new(format!("partition node {}", id), "listed twice"));
                }
                area_of_node[n] = Some(None);
                backbone.push(n);
            }
            None => v.push(Violation::new("partition", format!("unknown backbone node \"{}\"", id))),
        }
    }
    let mut sub_areas = Vec::new();
    for (k, s) in p.sub_areas.iter().enumerate() {
        let id = s.id.clone().unwrap_or_else(|| format!("area{}", k + 1));
        let mut members = Vec::new();
        for nid in &s.nodes {
            match node_index.get(nid) {
                Some(&n) => {
                    if area_of_node[n].is_some() {
                        v.push(Violation::new(format!("partition node {}", nid), "listed twice"));
                    }
                    if nodes[n].is_source() {
                        v.push(Violation::new(format!("partition node {}", nid), "substations must lie in the backbone"));
                    }
                    area_of_node[n] = Some(Some(k));
                    members.push(n);
                }
                None => v.push(Violation::new(format!("sub-area {}", id), format!("unknown node \"{}\"", nid))),
            }
        }
        if members.is_empty() {
            v.push(Violation::new(format!("sub-area {}", id), "has no nodes"));
        }
        let boundary = branch_index.get(&s.boundary_branch).copied();
        if boundary.is_none() {
            v.push(Violation::new(format!("sub-area {}", id), format!("unknown boundary branch \"{}\"", s.boundary_branch)));
        }
        sub_areas.push((id, members, boundary));
    }
    for (n, a) in area_of_node.iter().enumerate() {
        if a.is_none() {
            v.push(Violation::new(format!("partition node {}", nodes[n].id), "not assigned to any area"));
        }
    }
    if v.len() > before {
        return None;
    }
    let area_of_node: Vec<Option<usize>> = area_of_node.into_iter().map(|a| a.unwrap()).collect();
    let mut out = Vec::new();
    for (k, (id, members, boundary)) in sub_areas.into_iter().enumerate() {
        let b = boundary.unwrap();
        let br = &branches[b];
        let (entry, attach) = match (area_of_node[br.from], area_of_node[br.to]) {
            (Some(x), None) if x == k => (br.from, br.to),
            (None, Some(x)) if x == k => (br.to, br.from),
            _ => {
                v.push(Violation::new(
                    format!("sub-area {}", id),
                    "boundary branch must join a backbone node to a node of the sub-area",
                ));
                continue;
            }
        };
        out.push(SubArea {
            id,
            nodes: members,
            boundary: b,
            entry,
            attach,
        });
    }
    for br in branches.iter() {
        let (a, b) = (area_of_node[br.from], area_of_node[br.to]);
        let is_boundary = out.iter().any(|s| branches[s.boundary].id == br.id);
        if a != b && !is_boundary {
            v.push(Violation::new(
                format!("branch {}", br.id),
                "crosses an area border but is not a boundary branch",
            ));
        }
    }
    if v.len() > before {
        return None;
    }
    Some(Partition {
        backbone,
        sub_areas: out,
        area_of_node,
    })
}

// ---------------------------------------------------------------------------
// Horizon helpers

/// In-service indicator over stages `1..=horizon` (index `t - 1`).
///
/// Equipment installed at stage `install >= 1` serves `install..install+lifespan-1`;
/// `install == 0` denotes pre-existing equipment whose remaining life is `lifespan`.
pub fn aging_vector(lifespan: usize, install: usize, horizon: usize) -> Vec<u8> {
    (1..=horizon)
        .map(|t| {
            let on = if install == 0 {
                t <= lifespan
            } else {
                t >= install && t < install + lifespan
            };
            on as u8
        })
        .collect()
}

/// Present-value factors per stage: investment `(1+I)^-tau(t)` and the
/// operating sum over the stage's years.
pub fn pv_factors(h: &Horizon) -> (Vec<f64>, Vec<f64>) {
    let base = 1.0 + h.interest_rate;
    let inv = (0..h.stages)
        .map(|t| base.powf(-(h.stage_years[t] as f64)))
        .collect();
    let op = (0..h.stages)
        .map(|t| {
            (h.stage_years[t]..h.stage_years[t + 1])
                .map(|y| base.powf(-(y as f64)))
                .sum()
        })
        .collect();
    (inv, op)
}
