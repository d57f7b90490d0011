//! Built-in presets and seeded synthetic networks.

use std::collections::BTreeMap;

use gridplan_core::network::{
    BranchSpec, Catalog, ConductorType, FeederSpec, HorizonSpec, NodeSpec, PartitionSpec,
    SubAreaSpec, SubstationSpec, TransformerSlotSpec, TransformerType, VoltageLimits,
};
use gridplan_core::NetworkSpec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const SWITCH_H: f64 = 0.5;
const REPAIR_H: f64 = 4.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FixtureSpec {
    pub sub_areas: usize,
    pub nodes_per_area: usize,
    /// Including the substation node.
    pub backbone_nodes: usize,
    /// Probability that a non-tree candidate edge is kept.
    pub density: f64,
    /// SAIDI limit as a fraction of the limit-free baseline plan's SAIDI.
    pub saidi_factor: f64,
    pub seed: u64,
    /// Give every sub-area the first one's internal topology and lengths.
    #[serde(default)]
    pub uniform_areas: bool,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            sub_areas: 2,
            nodes_per_area: 4,
            backbone_nodes: 4,
            density: 0.3,
            saidi_factor: 0.8,
            seed: 1,
            uniform_areas: false,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.sub_areas < 1 || self.nodes_per_area < 1 || self.backbone_nodes < 2 {
            return Err("counts must be >= 1 (backbone >= 2)".into());
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(format!("density {} outside (0, 1]", self.density));
        }
        if !(self.saidi_factor > 0.0) {
            return Err("saidiFactor must be positive".into());
        }
        Ok(())
    }
}

pub fn catalog() -> Catalog {
    Catalog {
        conductors: vec![
            ConductorType {
                id: "c1".into(),
                capacity_mva: 5.0,
                r: 0.02,
                x: 0.01,
                failure_rate: 0.1,
                invest_cost: 10.0,
                maint_cost: 0.5,
                lifespan: 100,
            },
            ConductorType {
                id: "c2".into(),
                capacity_mva: 10.0,
                r: 0.01,
                x: 0.008,
                failure_rate: 0.05,
                invest_cost: 20.0,
                maint_cost: 0.8,
                lifespan: 100,
            },
        ],
        transformers: vec![TransformerType {
            id: "tr20".into(),
            capacity_mva: 20.0,
            invest_cost: 50.0,
            maint_cost: 1.0,
            lifespan: 100,
        }],
    }
}

fn node(id: usize, p: f64, q: f64, nc: u32) -> NodeSpec {
    NodeSpec {
        id: id.to_string(),
        load_p: vec![p],
        load_q: vec![q],
        customers: nc,
        substation: None,
    }
}

fn substation_node(id: usize, transformers: u32) -> NodeSpec {
    NodeSpec {
        substation: Some(SubstationSpec {
            candidate: true,
            existing: true,
            invest_cost: 0.0,
            maint_cost: 2.0,
            max_transformers: transformers,
        }),
        ..node(id, 0.0, 0.0, 0)
    }
}

fn branch(a: usize, b: usize, len: f64) -> BranchSpec {
    BranchSpec {
        id: None,
        from: a.to_string(),
        to: b.to_string(),
        length_km: len,
        existing_conductor: None,
        existing_life: None,
        switch_time_h: SWITCH_H,
        repair_time_h: REPAIR_H,
    }
}

fn key(a: usize, b: usize) -> String {
    format!("{}-{}", a, b)
}

fn horizon(limits: BTreeMap<String, f64>) -> HorizonSpec {
    HorizonSpec {
        stages: 1,
        stage_years: vec![1, 6],
        interest_rate: 0.1,
        eens_weight: 1.0,
        saidi_limit: limits,
    }
}

/// Substation at node 0 with one existing transformer per feeder head.
fn source_equipment(heads: &[(usize, usize)]) -> (Vec<TransformerSlotSpec>, Vec<FeederSpec>) {
    let slots = heads
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| TransformerSlotSpec {
            id: format!("tr{}", i + 1),
            node: "0".into(),
            outlet_branch: key(a, b),
            existing_type: Some("tr20".into()),
            existing_life: Some(100),
        })
        .collect();
    let feeders = heads
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| FeederSpec {
            id: format!("f{}", i + 1),
            head_branch: key(a, b),
        })
        .collect();
    (slots, feeders)
}

fn ids(v: impl IntoIterator<Item = usize>) -> Vec<String> {
    v.into_iter().map(|i| i.to_string()).collect()
}

/// Six nodes, one sub-area {3,4,5} joined to the backbone through (1,3).
pub fn preset_t1() -> NetworkSpec {
    let mut nodes = vec![substation_node(0, 2)];
    for i in 1..=5 {
        let (p, q, nc) = if [2, 4, 5].contains(&i) { (1.0, 0.5, 100) } else { (0.0, 0.0, 0) };
        nodes.push(node(i, p, q, nc));
    }
    let edges = [(0, 1), (0, 2), (1, 2), (1, 3), (3, 4), (3, 5), (4, 5)];
    let (slots, feeders) = source_equipment(&[(0, 1), (0, 2)]);
    let mut limits = BTreeMap::new();
    limits.insert("backbone".to_string(), 1.0);
    limits.insert("area1".to_string(), 1.0);
    NetworkSpec {
        name: "T1".into(),
        base_mva: 10.0,
        voltage: VoltageLimits::default(),
        nodes,
        branches: edges.iter().map(|&(a, b)| branch(a, b, 1.0)).collect(),
        transformer_slots: slots,
        feeders,
        catalog: catalog(),
        horizon: horizon(limits),
        partition: Some(PartitionSpec {
            backbone: ids(0..=2),
            sub_areas: vec![SubAreaSpec {
                id: Some("area1".into()),
                nodes: ids(3..=5),
                boundary_branch: key(1, 3),
            }],
        }),
    }
}

/// Six backbone nodes and two sub-areas of six nodes each.
pub fn preset_t2() -> NetworkSpec {
    let mut nodes = vec![substation_node(0, 2)];
    let loads = |i: usize| -> (f64, f64, u32) {
        match i {
            0 => (0.0, 0.0, 0),
            1..=5 => (0.4 + 0.1 * (i % 3) as f64, 0.2, 40 + 10 * (i % 2) as u32),
            _ => (0.3 + 0.1 * (i % 4) as f64, 0.15, 30 + 10 * (i % 3) as u32),
        }
    };
    for i in 1..18 {
        let (p, q, nc) = loads(i);
        nodes.push(node(i, p, q, nc));
    }
    let edges: Vec<(usize, usize, f64)> = vec![
        // backbone
        (0, 1, 1.0),
        (1, 2, 1.2),
        (0, 3, 1.0),
        (3, 4, 0.8),
        (4, 5, 1.0),
        // boundaries
        (2, 6, 1.0),
        (5, 12, 1.0),
        // area1
        (6, 7, 0.8),
        (7, 8, 1.0),
        (6, 9, 1.0),
        (9, 10, 0.7),
        (10, 11, 0.9),
        (8, 11, 1.2),
        // area2
        (12, 13, 1.0),
        (13, 14, 0.6),
        (12, 15, 0.9),
        (15, 16, 1.1),
        (16, 17, 0.8),
        (14, 17, 1.3),
    ];
    let (slots, feeders) = source_equipment(&[(0, 1), (0, 3)]);
    let mut limits = BTreeMap::new();
    limits.insert("backbone".to_string(), 1.2);
    limits.insert("area1".to_string(), 1.6);
    limits.insert("area2".to_string(), 1.6);
    NetworkSpec {
        name: "T2".into(),
        base_mva: 10.0,
        voltage: VoltageLimits::default(),
        nodes,
        branches: edges.iter().map(|&(a, b, l)| branch(a, b, l)).collect(),
        transformer_slots: slots,
        feeders,
        catalog: catalog(),
        horizon: horizon(limits),
        partition: Some(PartitionSpec {
            backbone: ids(0..6),
            sub_areas: vec![
                SubAreaSpec {
                    id: Some("area1".into()),
                    nodes: ids(6..12),
                    boundary_branch: key(2, 6),
                },
                SubAreaSpec {
                    id: Some("area2".into()),
                    nodes: ids(12..18),
                    boundary_branch: key(5, 12),
                },
            ],
        }),
    }
}

pub fn preset(name: &str) -> Option<NetworkSpec> {
    match name.to_ascii_uppercase().as_str() {
        "T1" => Some(preset_t1()),
        "T2" => Some(preset_t2()),
        _ => None,
    }
}

/// Random spanning tree over `nodes` (first entry is the root) plus extra
/// edges kept with probability `density`.
fn random_graph(rng: &mut ChaCha8Rng, nodes: &[usize], density: f64) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut tree = Vec::new();
    for i in 1..nodes.len() {
        let parent = nodes[rng.gen_range(0..i)];
        tree.push((parent, nodes[i]));
    }
    let mut extra = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let (a, b) = (nodes[i], nodes[j]);
            if tree.contains(&(a, b)) || tree.contains(&(b, a)) {
                continue;
            }
            if rng.gen_bool(density) {
                extra.push((a, b));
            }
        }
    }
    (tree, extra)
}

/// Seeded synthetic network. Node 0 is the substation; backbone nodes come
/// next, then each sub-area's nodes with its entry node first.
pub fn gen_fixture(spec: &FixtureSpec) -> Result<NetworkSpec, String> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nb = spec.backbone_nodes;
    let m = spec.nodes_per_area;
    let total = nb + spec.sub_areas * m;
    let mut nodes = vec![substation_node(0, 1)];
    for i in 1..total {
        let p = (rng.gen_range(2..=8) as f64) / 10.0;
        let q = (p * 0.5 * 100.0).round() / 100.0;
        let nc = rng.gen_range(2..=8) * 10;
        nodes.push(node(i, p, q, nc));
    }
    let backbone: Vec<usize> = (0..nb).collect();
    let (tree, extra) = random_graph(&mut rng, &backbone, spec.density);
    // Keep two feeders when the backbone allows it.
    let mut heads: Vec<(usize, usize)> = tree.iter().copied().filter(|e| e.0 == 0).collect();
    if heads.len() < 2 && nb >= 3 {
        if let Some(&e) = extra.iter().find(|e| e.0 == 0) {
            heads.push(e);
        }
    }
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let len = |rng: &mut ChaCha8Rng| (rng.gen_range(6..=14) as f64) / 10.0;
    for &(a, b) in tree.iter().chain(&extra) {
        // Extra edges at the substation are only kept as feeder heads.
        if a == 0 && !heads.contains(&(a, b)) {
            continue;
        }
        let l = len(&mut rng);
        edges.push((a, b, l));
    }
    let mut sub_areas = Vec::new();
    let attach_choices: Vec<usize> = (1..nb).collect();
    // Shared internal edges as offsets from a sub-area's first node, drawn
    // from their own stream so the shape does not depend on the area count.
    let template: Vec<(usize, usize, f64)> = if spec.uniform_areas {
        let mut trng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
        let local: Vec<usize> = (0..m).collect();
        let (t, e) = random_graph(&mut trng, &local, spec.density);
        t.iter().chain(&e).map(|&(a, b)| (a, b, len(&mut trng))).collect()
    } else {
        Vec::new()
    };
    for k in 0..spec.sub_areas {
        let first = nb + k * m;
        let members: Vec<usize> = (first..first + m).collect();
        let attach = *attach_choices.choose(&mut rng).unwrap();
        let entry = members[0];
        let l = len(&mut rng);
        edges.push((attach, entry, l));
        if spec.uniform_areas {
            edges.extend(template.iter().map(|&(a, b, l)| (first + a, first + b, l)));
        } else {
            let (t, e) = random_graph(&mut rng, &members, spec.density);
            for &(a, b) in t.iter().chain(&e) {
                let l = len(&mut rng);
                edges.push((a, b, l));
            }
        }
        sub_areas.push(SubAreaSpec {
            id: Some(format!("area{}", k + 1)),
            nodes: ids(members),
            boundary_branch: key(attach, entry),
        });
    }
    let (slots, feeders) = source_equipment(&heads);
    if let Some(s) = nodes[0].substation.as_mut() {
        s.max_transformers = heads.len() as u32;
    }
    let mut net = NetworkSpec {
        name: format!("gen-s{}-k{}m{}b{}", spec.seed, spec.sub_areas, m, nb),
        base_mva: 10.0,
        voltage: VoltageLimits::default(),
        nodes,
        branches: edges.iter().map(|&(a, b, l)| branch(a, b, l)).collect(),
        transformer_slots: slots,
        feeders,
        catalog: catalog(),
        horizon: horizon(BTreeMap::new()),
        partition: Some(PartitionSpec {
            backbone: ids(backbone),
            sub_areas,
        }),
    };
    net.horizon.saidi_limit = baseline_limits(&net, spec.saidi_factor);
    Ok(net)
}

/// SAIDI of the generator's own tree built entirely from the cheapest
/// conductor, with no restoration, scaled by `factor`. Rounded up to 1e-3.
fn baseline_limits(net: &NetworkSpec, factor: f64) -> BTreeMap<String, f64> {
    let parsed = gridplan_core::Network::from_spec(net.clone()).expect("generated network is valid");
    let part = parsed.partition.as_ref().unwrap();
    let rate = net.catalog.conductors[0].failure_rate;
    // Children lists of the BFS tree over all branches, rooted at node 0.
    let n = parsed.nodes.len();
    let mut parent_edge = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for (b, br) in parsed.branches.iter().enumerate() {
            if !br.touches(u) {
                continue;
            }
            let v = br.other(u);
            if !seen[v] {
                seen[v] = true;
                parent_edge[v] = b;
                queue.push_back(v);
            }
        }
    }
    let feeder_of = |mut v: usize| -> usize {
        while parsed.branches[parent_edge[v]].other(v) != 0 {
            v = parsed.branches[parent_edge[v]].other(v);
        }
        parent_edge[v]
    };
    let tree: Vec<usize> = (1..n).map(|v| parent_edge[v]).collect();
    let mut cid = vec![0.0; n];
    for v in 1..n {
        for &b in &tree {
            let br = &parsed.branches[b];
            let child = if parent_edge[br.to] == b { br.to } else { br.from };
            if feeder_of(child) != feeder_of(v) {
                continue;
            }
            if let gridplan_core::network::BranchArea::Internal(k) = parsed.branch_area(b) {
                if part.area_of_node[v] != Some(k) {
                    continue;
                }
            }
            cid[v] += rate * br.length_km * br.repair_time_h;
        }
    }
    let mut out = BTreeMap::new();
    let mut put = |id: &str, members: Vec<usize>| {
        let (mut num, mut den) = (0.0, 0.0);
        for v in members {
            let nc = parsed.nodes[v].customers as f64;
            num += nc * cid[v];
            den += nc;
        }
        if den > 0.0 {
            out.insert(id.to_string(), (factor * num / den * 1000.0).ceil() / 1000.0);
        }
    };
    put("backbone", part.backbone.iter().copied().filter(|&v| v != 0).collect());
    for s in &part.sub_areas {
        put(&s.id, s.nodes.clone());
    }
    out
}

pub fn to_json(net: &NetworkSpec) -> String {
    serde_json::to_string_pretty(net).expect("network serializes") + "\n"
}
