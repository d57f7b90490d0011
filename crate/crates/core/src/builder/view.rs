//! Model views: which nodes and branches a planning model sees.
//!
//! The backbone view replaces each sub-area by an equivalent load node at the
//! far end of its boundary branch. A sub-area view replaces the backbone by an
//! equivalent source joined to the sub-area through an equivalent branch.

use crate::network::{BranchArea, Network};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewKind {
    Centralized,
    Backbone,
    SubArea(usize),
}

impl ViewKind {
    pub fn tag(&self) -> String {
        match self {
            ViewKind::Centralized => "cen".into(),
            ViewKind::Backbone => "bb".into(),
            ViewKind::SubArea(k) => format!("sa{}", k + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    Load,
    /// Substation node of the network.
    Source,
    /// Equivalent source standing for the backbone (sub-area view).
    Eds(usize),
    /// Equivalent load standing for a sub-area (backbone view).
    Eln(usize),
}

impl NodeRole {
    pub fn is_source(self) -> bool {
        matches!(self, NodeRole::Source | NodeRole::Eds(_))
    }
}

#[derive(Clone, Debug)]
pub struct VNode {
    pub id: String,
    pub global: Option<usize>,
    pub role: NodeRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchRole {
    Real(usize),
    /// Equivalent branch feeding a sub-area from its equivalent source.
    Eob(usize),
}

#[derive(Clone, Debug)]
pub struct VBranch {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub role: BranchRole,
    pub switch_time_h: f64,
    pub repair_time_h: f64,
    /// A fault here only interrupts nodes of this sub-area.
    pub region: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct VFeeder {
    pub id: String,
    pub head: usize,
    /// Transformer slot whose outlet is the head branch.
    pub slot: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct VArea {
    pub id: String,
    pub nodes: Vec<usize>,
    pub limit: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct View {
    pub kind: ViewKind,
    pub nodes: Vec<VNode>,
    pub branches: Vec<VBranch>,
    pub feeders: Vec<VFeeder>,
    pub areas: Vec<VArea>,
    /// Sub-area region of each local node, if any.
    pub region_of_node: Vec<Option<usize>>,
}

impl View {
    pub fn non_source(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].role.is_source())
    }

    pub fn local_node(&self, global: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.global == Some(global))
    }

    pub fn local_branch(&self, global: usize) -> Option<usize> {
        self.branches
            .iter()
            .position(|b| b.role == BranchRole::Real(global))
    }
}

fn real_branch(net: &Network, g: usize, from: usize, to: usize, region: Option<usize>) -> VBranch {
    let b = &net.branches[g];
    VBranch {
        id: b.id.clone(),
        from,
        to,
        role: BranchRole::Real(g),
        switch_time_h: b.switch_time_h,
        repair_time_h: b.repair_time_h,
        region,
    }
}

fn role_of(net: &Network, n: usize) -> NodeRole {
    if net.is_source(n) {
        NodeRole::Source
    } else {
        NodeRole::Load
    }
}

fn feeders(net: &Network, map: impl Fn(usize) -> usize) -> Vec<VFeeder> {
    net.feeders
        .iter()
        .map(|f| VFeeder {
            id: f.id.clone(),
            head: map(f.head),
            slot: net.slots.iter().position(|s| s.outlet == f.head),
        })
        .collect()
}

pub fn centralized_view(net: &Network) -> View {
    let nodes: Vec<VNode> = net
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| VNode {
            id: n.id.clone(),
            global: Some(i),
            role: role_of(net, i),
        })
        .collect();
    let branches: Vec<VBranch> = (0..net.branches.len())
        .map(|g| {
            let region = match net.branch_area(g) {
                BranchArea::Internal(k) => Some(k),
                _ => None,
            };
            real_branch(net, g, net.branches[g].from, net.branches[g].to, region)
        })
        .collect();
    let region_of_node = match &net.partition {
        Some(p) => p.area_of_node.clone(),
        None => vec![None; nodes.len()],
    };
    let mut areas = Vec::new();
    match &net.partition {
        None => areas.push(VArea {
            id: "system".into(),
            nodes: (0..nodes.len()).filter(|&i| !net.is_source(i)).collect(),
            limit: net.saidi_limit("system"),
        }),
        Some(p) => {
            areas.push(VArea {
                id: "backbone".into(),
                nodes: p.backbone.iter().copied().filter(|&i| !net.is_source(i)).collect(),
                limit: net.saidi_limit("backbone"),
            });
            for s in &p.sub_areas {
                areas.push(VArea {
                    id: s.id.clone(),
                    nodes: s.nodes.clone(),
                    limit: net.saidi_limit(&s.id),
                });
            }
        }
    }
    View {
        kind: ViewKind::Centralized,
        feeders: feeders(net, |g| g),
        nodes,
        branches,
        areas,
        region_of_node,
    }
}

/// Panics if the network has no partition.
pub fn backbone_view(net: &Network) -> View {
    let p = net.partition.as_ref().expect("backbone view needs a partition");
    let mut nodes: Vec<VNode> = Vec::new();
    let mut local = vec![usize::MAX; net.nodes.len()];
    for &g in &p.backbone {
        local[g] = nodes.len();
        nodes.push(VNode {
            id: net.nodes[g].id.clone(),
            global: Some(g),
            role: role_of(net, g),
        });
    }
    let mut eln = Vec::new();
    for (k, s) in p.sub_areas.iter().enumerate() {
        eln.push(nodes.len());
        nodes.push(VNode {
            id: format!("eln:{}", s.id),
            global: None,
            role: NodeRole::Eln(k),
        });
    }
    let mut branches = Vec::new();
    let mut local_branch = vec![usize::MAX; net.branches.len()];
    for (g, b) in net.branches.iter().enumerate() {
        match net.branch_area(g) {
            BranchArea::Backbone => {
                local_branch[g] = branches.len();
                branches.push(real_branch(net, g, local[b.from], local[b.to], None));
            }
            BranchArea::Boundary(k) => {
                let s = &p.sub_areas[k];
                let (f, t) = if b.from == s.attach {
                    (local[s.attach], eln[k])
                } else {
                    (eln[k], local[s.attach])
                };
                local_branch[g] = branches.len();
                branches.push(real_branch(net, g, f, t, None));
            }
            BranchArea::Internal(_) => {}
        }
    }
    let areas = vec![VArea {
        id: "backbone".into(),
        nodes: (0..p.backbone.len())
            .filter(|&i| nodes[i].role == NodeRole::Load)
            .collect(),
        limit: net.saidi_limit("backbone"),
    }];
    let n = nodes.len();
    View {
        kind: ViewKind::Backbone,
        feeders: feeders(net, |g| local_branch[g]),
        nodes,
        branches,
        areas,
        region_of_node: vec![None; n],
    }
}

/// Panics if the network has no partition or `k` is out of range.
pub fn subarea_view(net: &Network, k: usize) -> View {
    let p = net.partition.as_ref().expect("sub-area view needs a partition");
    let s = &p.sub_areas[k];
    let mut nodes = vec![VNode {
        id: format!("eds:{}", s.id),
        global: None,
        role: NodeRole::Eds(k),
    }];
    let mut local = vec![usize::MAX; net.nodes.len()];
    for &g in &s.nodes {
        local[g] = nodes.len();
        nodes.push(VNode {
            id: net.nodes[g].id.clone(),
            global: Some(g),
            role: NodeRole::Load,
        });
    }
    let bnd = &net.branches[s.boundary];
    let mut branches = vec![VBranch {
        id: format!("eob:{}", s.id),
        from: 0,
        to: local[s.entry],
        role: BranchRole::Eob(k),
        switch_time_h: bnd.switch_time_h,
        repair_time_h: bnd.repair_time_h,
        region: None,
    }];
    for (g, b) in net.branches.iter().enumerate() {
        if net.branch_area(g) == BranchArea::Internal(k) {
            branches.push(real_branch(net, g, local[b.from], local[b.to], None));
        }
    }
    let n = nodes.len();
    View {
        kind: ViewKind::SubArea(k),
        feeders: vec![VFeeder {
            id: format!("eob:{}", s.id),
            head: 0,
            slot: None,
        }],
        areas: vec![VArea {
            id: s.id.clone(),
            nodes: (1..n).collect(),
            limit: net.saidi_limit(&s.id),
        }],
        nodes,
        branches,
        region_of_node: vec![None; n],
    }
}
