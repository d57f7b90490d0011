use std::f64::consts::SQRT_2;

use gridplan_core::network::BranchArea;
use gridplan_core::{Network, StagePlan};
use gridplan_milp::{solve_milp, MilpModel, MilpStatus, Sense, SolverConfig, VarId};

use crate::OracleError;

/// Weight per unrestored node added to its load in the restoration
/// objective, so that zero-load nodes are still restored when possible.
pub const RESTORE_TIE_BREAK: f64 = 1e-3;

/// Equipment and normal-state topology of one plan stage, by network index.
#[derive(Clone, Debug)]
pub struct StageTopology {
    pub stage: usize,
    /// Conductor type index in service per branch.
    pub conductor: Vec<Option<usize>>,
    pub closed: Vec<bool>,
    /// Substations in service.
    pub source: Vec<bool>,
    /// Transformer capacity limiting a feeder head branch; `Some(0.0)` for a
    /// head whose slot is empty.
    pub head_cap: Vec<Option<f64>>,
    /// Orientation of a head branch: true when `from` is the substation.
    pub head_from_source: Vec<bool>,
    /// Normal-state feeder per non-source node.
    pub feeder: Vec<Option<usize>>,
    /// Normal-state feeder per closed branch.
    pub branch_feeder: Vec<Option<usize>>,
}

impl StageTopology {
    /// Decodes and checks a stage plan: closed branches must be built and
    /// form one tree per energized feeder covering every load node.
    pub fn from_plan(net: &Network, sp: &StagePlan) -> Result<Self, OracleError> {
        let t = sp.stage.checked_sub(1).filter(|&t| t < net.stages()).ok_or_else(|| {
            OracleError::InvalidPlan(format!("stage {} outside the horizon", sp.stage))
        })?;
        let nb = net.branches.len();
        let nn = net.nodes.len();
        let mut conductor = vec![None; nb];
        for (bid, cid) in &sp.conductors {
            let b = net
                .branch_idx(bid)
                .ok_or_else(|| OracleError::InvalidPlan(format!("unknown branch {}", bid)))?;
            let a = net
                .catalog
                .conductors
                .iter()
                .position(|c| &c.id == cid)
                .ok_or_else(|| OracleError::InvalidPlan(format!("unknown conductor {}", cid)))?;
            conductor[b] = Some(a);
        }
        let mut source = vec![false; nn];
        for id in &sp.substations {
            let n = net
                .node_idx(id)
                .filter(|&n| net.nodes[n].substation.is_some())
                .ok_or_else(|| OracleError::InvalidPlan(format!("{} is not a substation node", id)))?;
            source[n] = true;
        }
        let mut head_cap = vec![None; nb];
        let mut head_from_source = vec![false; nb];
        for f in &net.feeders {
            let b = f.head;
            let cap = net
                .slots
                .iter()
                .find(|s| s.outlet == b)
                .and_then(|s| sp.transformers.get(&s.id))
                .and_then(|ty| net.catalog.transformers.iter().find(|x| &x.id == ty))
                .map_or(0.0, |x| x.capacity_mva);
            head_cap[b] = Some(cap);
            head_from_source[b] = net.nodes[net.branches[b].from].substation.is_some();
        }
        let mut closed = vec![false; nb];
        for bid in &sp.closed {
            let b = net
                .branch_idx(bid)
                .ok_or_else(|| OracleError::InvalidPlan(format!("unknown branch {}", bid)))?;
            if conductor[b].is_none() {
                return Err(OracleError::InvalidPlan(format!("closed branch {} is not built", bid)));
            }
            closed[b] = true;
        }
        let mut topo = StageTopology {
            stage: t + 1,
            conductor,
            closed,
            source,
            head_cap,
            head_from_source,
            feeder: vec![None; nn],
            branch_feeder: vec![None; nb],
        };
        topo.trace(net)?;
        Ok(topo)
    }

    fn is_load(&self, net: &Network, n: usize) -> bool {
        net.nodes[n].substation.is_none()
    }

    fn trace(&mut self, net: &Network) -> Result<(), OracleError> {
        for (fi, f) in net.feeders.iter().enumerate() {
            let hb = f.head;
            if !self.closed[hb] {
                continue;
            }
            let br = &net.branches[hb];
            let (src, start) = if self.head_from_source[hb] { (br.from, br.to) } else { (br.to, br.from) };
            if !self.source[src] || self.head_cap[hb] == Some(0.0) {
                return Err(OracleError::InvalidPlan(format!("feeder {} is closed without a source", f.id)));
            }
            self.branch_feeder[hb] = Some(fi);
            let mut stack = vec![start];
            while let Some(n) = stack.pop() {
                if !self.is_load(net, n) {
                    return Err(OracleError::InvalidPlan(format!("feeder {} reaches a second substation", f.id)));
                }
                if self.feeder[n].is_some() {
                    return Err(OracleError::InvalidPlan(format!("node {} is fed twice", net.nodes[n].id)));
                }
                self.feeder[n] = Some(fi);
                for (b, br) in net.branches.iter().enumerate() {
                    if self.closed[b] && self.branch_feeder[b].is_none() && br.touches(n) {
                        self.branch_feeder[b] = Some(fi);
                        stack.push(br.other(n));
                    }
                }
            }
        }
        for n in 0..net.nodes.len() {
            // Junctions with no demand may stay unbuilt.
            let node = &net.nodes[n];
            let t = self.stage - 1;
            let idle = node.customers == 0 && node.load_p[t] == 0.0 && node.load_q[t] == 0.0;
            if self.is_load(net, n) && self.feeder[n].is_none() && !idle {
                return Err(OracleError::InvalidPlan(format!("node {} is not supplied", net.nodes[n].id)));
            }
        }
        if let Some(b) = (0..net.branches.len()).find(|&b| self.closed[b] && self.branch_feeder[b].is_none()) {
            return Err(OracleError::InvalidPlan(format!("closed branch {} belongs to no feeder", net.branches[b].id)));
        }
        Ok(())
    }

    /// Failure rate (per year) of a built branch.
    pub fn rate(&self, net: &Network, b: usize) -> f64 {
        self.conductor[b].map_or(0.0, |a| net.catalog.conductors[a].failure_rate * net.branches[b].length_km)
    }

    /// Nodes interrupted by a fault on `b`: the faulted feeder, limited to
    /// the sub-area when the branch lies inside one.
    pub fn affected(&self, net: &Network, b: usize) -> Vec<bool> {
        let nn = net.nodes.len();
        let Some(f) = self.branch_feeder[b] else {
            return vec![false; nn];
        };
        let area = match net.branch_area(b) {
            BranchArea::Internal(k) => Some(k),
            _ => None,
        };
        (0..nn)
            .map(|n| {
                self.feeder[n] == Some(f)
                    && area.map_or(true, |k| {
                        net.partition.as_ref().and_then(|p| p.area_of_node[n]) == Some(k)
                    })
            })
            .collect()
    }
}

/// Result of one fault: who is interrupted, who stays out until repair and
/// which branches are closed after reconfiguration.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultOutcome {
    pub branch: usize,
    pub affected: Vec<bool>,
    pub unrestored: Vec<bool>,
    pub closed: Vec<bool>,
}

/// Isolates `branch` and restores as much interrupted load as the fixed
/// equipment allows. Unaffected nodes must stay supplied.
pub fn simulate_fault(net: &Network, topo: &StageTopology, branch: usize) -> Result<FaultOutcome, OracleError> {
    if topo.conductor.get(branch).copied().flatten().is_none() {
        return Err(OracleError::InvalidPlan(format!(
            "fault on branch {} which is not built",
            net.branches.get(branch).map_or("?", |b| b.id.as_str())
        )));
    }
    let affected = topo.affected(net, branch);
    let nb = net.branches.len();
    let nn = net.nodes.len();
    if !affected.iter().any(|&a| a) {
        let mut closed = topo.closed.clone();
        closed[branch] = false;
        return Ok(FaultOutcome {
            branch,
            unrestored: vec![false; nn],
            affected,
            closed,
        });
    }
    let t = topo.stage - 1;
    let fail = |reason: String| OracleError::Restoration {
        branch: net.branches[branch].id.clone(),
        reason,
    };

    let live = |n: usize| topo.source[n] || (net.nodes[n].substation.is_none() && topo.feeder[n].is_some());
    let loads: Vec<usize> = (0..nn).filter(|&n| net.nodes[n].substation.is_none() && live(n)).collect();
    let k = loads.len() as f64;
    let (vmin, vmax) = (net.voltage.min, net.voltage.max);

    let mut m = MilpModel::new(format!("restore_{}_t{}", net.branches[branch].id, topo.stage));
    let u: Vec<Option<VarId>> = (0..nn)
        .map(|n| live(n).then(|| m.add_continuous(format!("u_{}", net.nodes[n].id), vmin, vmax)))
        .collect();
    let mut s = vec![None; nb];
    let mut pf = vec![None; nb];
    let mut qf = vec![None; nb];
    let mut ff = vec![None; nb];
    for (b, br) in net.branches.iter().enumerate() {
        let Some(a) = topo.conductor[b] else { continue };
        if b == branch || !live(br.from) || !live(br.to) || topo.head_cap[b] == Some(0.0) {
            continue;
        }
        let ct = &net.catalog.conductors[a];
        let cap = ct.capacity_mva;
        let sv = m.add_binary(format!("s_{}", br.id));
        let p = m.add_continuous(format!("P_{}", br.id), -cap, cap);
        let q = m.add_continuous(format!("Q_{}", br.id), -cap, cap);
        let f = m.add_continuous(format!("F_{}", br.id), -k, k);
        for (v, nm) in [(p, "P"), (q, "Q")] {
            m.add_constraint(format!("{}hi_{}", nm, br.id), vec![(v, 1.0), (sv, -cap)], Sense::Le, 0.0);
            m.add_constraint(format!("{}lo_{}", nm, br.id), vec![(v, -1.0), (sv, -cap)], Sense::Le, 0.0);
        }
        for (a1, a2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            m.add_constraint(
                format!("S{}{}_{}", a1, a2, br.id),
                vec![(p, a1), (q, a2), (sv, -SQRT_2 * cap)],
                Sense::Le,
                0.0,
            );
        }
        m.add_constraint(format!("Fhi_{}", br.id), vec![(f, 1.0), (sv, -k)], Sense::Le, 0.0);
        m.add_constraint(format!("Flo_{}", br.id), vec![(f, -1.0), (sv, -k)], Sense::Le, 0.0);
        let kr = 2.0 * ct.r * br.length_km / net.base_mva;
        let kx = 2.0 * ct.x * br.length_km / net.base_mva;
        let mv = (vmax - vmin) + (kr + kx) * cap + 1.0;
        let (ui, uj) = (u[br.from].unwrap(), u[br.to].unwrap());
        m.add_constraint(
            format!("vhi_{}", br.id),
            vec![(uj, 1.0), (ui, -1.0), (p, kr), (q, kx), (sv, mv)],
            Sense::Le,
            mv,
        );
        m.add_constraint(
            format!("vlo_{}", br.id),
            vec![(uj, -1.0), (ui, 1.0), (p, -kr), (q, -kx), (sv, mv)],
            Sense::Le,
            mv,
        );
        if let Some(tc) = topo.head_cap[b] {
            let sign = if topo.head_from_source[b] { 1.0 } else { -1.0 };
            m.add_constraint(format!("trP_{}", br.id), vec![(p, sign)], Sense::Le, tc);
            m.add_constraint(format!("trQ_{}", br.id), vec![(q, sign)], Sense::Le, tc);
            for (a1, a2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                m.add_constraint(format!("trS{}{}_{}", a1, a2, br.id), vec![(p, a1), (q, a2)], Sense::Le, SQRT_2 * tc);
            }
        }
        s[b] = Some(sv);
        pf[b] = Some(p);
        qf[b] = Some(q);
        ff[b] = Some(f);
    }
    let mut qv = vec![None; nn];
    let mut count: Vec<(VarId, f64)> = s.iter().flatten().map(|&v| (v, 1.0)).collect();
    for &n in &loads {
        let node = &net.nodes[n];
        let (lp, lq) = (node.load_p[t], node.load_q[t]);
        let mut bp = Vec::new();
        let mut bq = Vec::new();
        let mut bf = Vec::new();
        for (b, br) in net.branches.iter().enumerate() {
            let Some(p) = pf[b] else { continue };
            let dir = if br.to == n {
                1.0
            } else if br.from == n {
                -1.0
            } else {
                continue;
            };
            bp.push((p, dir));
            bq.push((qf[b].unwrap(), dir));
            bf.push((ff[b].unwrap(), dir));
        }
        if affected[n] {
            let q = m.add_binary(format!("q_{}", node.id));
            m.set_obj(q, lp + RESTORE_TIE_BREAK);
            bp.push((q, lp));
            bq.push((q, lq));
            bf.push((q, 1.0));
            count.push((q, 1.0));
            qv[n] = Some(q);
        }
        m.add_constraint(format!("balP_{}", node.id), bp, Sense::Eq, lp);
        m.add_constraint(format!("balQ_{}", node.id), bq, Sense::Eq, lq);
        m.add_constraint(format!("balF_{}", node.id), bf, Sense::Eq, 1.0);
    }
    m.add_constraint("radial", count, Sense::Eq, k);

    let sol = solve_milp(&m, &SolverConfig::default()).map_err(|e| fail(e.to_string()))?;
    if sol.status != MilpStatus::Optimal {
        return Err(fail(format!("restoration model status {:?}", sol.status)));
    }
    let on = |v: Option<VarId>| v.map_or(false, |v| sol.x[v.0] > 0.5);
    Ok(FaultOutcome {
        branch,
        unrestored: qv.iter().map(|&v| on(v)).collect(),
        closed: s.iter().map(|&v| on(v)).collect(),
        affected,
    })
}
