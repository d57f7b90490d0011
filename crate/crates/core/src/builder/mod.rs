//! Planning MILP construction for the centralized model and for the
//! backbone / sub-area subproblems of the decomposition.

pub mod atlas;
pub mod view;

use std::f64::consts::SQRT_2;

use gridplan_milp::{MilpModel, Sense, VarId};

use crate::network::{aging_vector, pv_factors, Network};
pub use atlas::{Atlas, CostBreakdown, CostVectors, ScenarioVars, StageAtlas};
pub use view::{backbone_view, centralized_view, subarea_view, BranchRole, NodeRole, View, ViewKind};

#[derive(Clone, Debug)]
pub struct BuildOptions {
    /// Objective weight per interruption / not-restored flag.
    pub tie_break: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { tie_break: 1e-2 }
    }
}

#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub model: MilpModel,
    pub atlas: Atlas,
}

impl BuiltModel {
    pub fn kind(&self) -> ViewKind {
        self.atlas.view.kind
    }

    /// Objective without the tie-break term.
    pub fn cost(&self, x: &[f64]) -> CostBreakdown {
        self.atlas.cost.breakdown(x)
    }
}

/// Flow big-M: `sqrt(2) * max conductor capacity`.
pub fn flow_big_m(net: &Network) -> f64 {
    SQRT_2 * net.max_conductor_capacity()
}

/// Voltage-drop big-M for a branch of `length_km`.
pub fn voltage_big_m(net: &Network, length_km: f64) -> f64 {
    let rx = net
        .catalog
        .conductors
        .iter()
        .map(|c| c.r.max(c.x))
        .fold(0.0, f64::max);
    (net.voltage.max - net.voltage.min)
        + 2.0 * rx * length_km * SQRT_2 * net.max_conductor_capacity() / net.base_mva
}

/// Big-M for linearising `rate * duration * binary`.
pub fn product_big_m(rate_bound: f64, duration_bound: f64) -> f64 {
    rate_bound * duration_bound
}

/// Bounds shared by both sides of a sub-area boundary, per stage.
#[derive(Clone, Debug)]
pub struct BoundaryBox {
    pub load_p: Vec<f64>,
    pub load_q: Vec<f64>,
    pub rate: f64,
    pub duration: f64,
}

pub fn boundary_box(net: &Network, k: usize) -> BoundaryBox {
    let p = net.partition.as_ref().expect("partition required");
    let s = &p.sub_areas[k];
    let stages = net.stages();
    let load_p = (0..stages)
        .map(|t| s.nodes.iter().map(|&n| net.nodes[n].load_p[t]).sum())
        .collect();
    let load_q = (0..stages)
        .map(|t| s.nodes.iter().map(|&n| net.nodes[n].load_q[t]).sum())
        .collect();
    let lam = net.max_failure_rate();
    let mut rate = 0.0;
    let mut trp: f64 = 0.0;
    for (g, b) in net.branches.iter().enumerate() {
        if !matches!(net.branch_area(g), crate::network::BranchArea::Internal(_)) {
            rate += lam * b.length_km;
            trp = trp.max(b.repair_time_h);
        }
    }
    BoundaryBox {
        load_p,
        load_q,
        rate,
        duration: rate * trp,
    }
}

pub fn build_centralized(net: &Network, opts: &BuildOptions) -> BuiltModel {
    Emitter::new(net, centralized_view(net), opts).run()
}

pub fn build_backbone(net: &Network, opts: &BuildOptions) -> BuiltModel {
    Emitter::new(net, backbone_view(net), opts).run()
}

pub fn build_subarea(net: &Network, k: usize, opts: &BuildOptions) -> BuiltModel {
    Emitter::new(net, subarea_view(net, k), opts).run()
}

/// All subproblems of the decomposition: backbone first, then sub-areas in order.
pub fn build_subproblems(net: &Network, opts: &BuildOptions) -> Vec<BuiltModel> {
    let n = net.partition.as_ref().map_or(0, |p| p.sub_areas.len());
    let mut v = vec![build_backbone(net, opts)];
    v.extend((0..n).map(|k| build_subarea(net, k, opts)));
    v
}

type Terms = Vec<(VarId, f64)>;

// Branching classes: equipment, then normal topology, then restoration.
const PRIO_INVEST: i32 = 3;
const PRIO_TOPOLOGY: i32 = 2;
const PRIO_RESTORE: i32 = 1;

struct Emitter<'a> {
    net: &'a Network,
    view: View,
    opts: &'a BuildOptions,
    m: MilpModel,
    tag: String,
    stages: Vec<StageAtlas>,
    install: Vec<Vec<Vec<Option<VarId>>>>,
    tr_install: Vec<Vec<Vec<Option<VarId>>>>,
    sub_build: Vec<Vec<Option<VarId>>>,
    cost: CostVectors,
    flow_m: f64,
    delta_inv: Vec<f64>,
    delta_op: Vec<f64>,
    /// Sub-area boxes (backbone and sub-area views).
    boxes: Vec<Option<BoundaryBox>>,
}

impl<'a> Emitter<'a> {
    fn new(net: &'a Network, view: View, opts: &'a BuildOptions) -> Self {
        let (delta_inv, delta_op) = pv_factors(&net.horizon);
        let nsub = net.partition.as_ref().map_or(0, |p| p.sub_areas.len());
        let needs_box = !matches!(view.kind, ViewKind::Centralized);
        let boxes = (0..nsub)
            .map(|k| needs_box.then(|| boundary_box(net, k)))
            .collect();
        let tag = view.kind.tag();
        Self {
            net,
            opts,
            m: MilpModel::new(format!("{}:{}", net.name, tag)),
            tag,
            stages: Vec::new(),
            install: Vec::new(),
            tr_install: Vec::new(),
            sub_build: Vec::new(),
            cost: CostVectors::default(),
            flow_m: flow_big_m(net),
            delta_inv,
            delta_op,
            boxes,
            view,
        }
    }

    fn name(&self, s: &str) -> String {
        format!("x_{}_{}", self.tag, s)
    }

    fn cont(&mut self, s: String, lo: f64, hi: f64) -> VarId {
        let n = self.name(&s);
        self.m.add_continuous(n, lo, hi)
    }

    fn bin(&mut self, s: String) -> VarId {
        let n = self.name(&s);
        self.m.add_binary(n)
    }

    fn row(&mut self, s: String, terms: Terms, sense: Sense, rhs: f64) {
        self.m.add_constraint(s, terms, sense, rhs);
    }

    fn obj(&mut self, v: VarId, c: f64) {
        self.m.add_obj(v, c);
    }

    fn run(mut self) -> BuiltModel {
        let stages = self.net.stages();
        self.stages = vec![StageAtlas::default(); stages];
        self.equipment();
        for t in 0..stages {
            self.stage_equipment(t);
            self.sources(t);
            self.scenarios(t);
            self.affiliation(t);
            self.cut_sets(t);
            self.reliability(t);
            self.coordination(t);
        }
        self.m.obj_offset = self.cost.maintenance_const;
        let coord_labels = self.coord_labels();
        BuiltModel {
            model: self.m,
            atlas: Atlas {
                view: self.view,
                stages: self.stages,
                install: self.install,
                tr_install: self.tr_install,
                sub_build: self.sub_build,
                cost: self.cost,
                coord_labels,
            },
        }
    }

    fn coord_labels(&self) -> Vec<String> {
        match self.view.kind {
            ViewKind::Centralized => vec![],
            ViewKind::Backbone => {
                let p = self.net.partition.as_ref().unwrap();
                p.sub_areas
                    .iter()
                    .flat_map(|s| {
                        ["cif", "cid", "p", "q", "cap", "u"]
                            .iter()
                            .map(move |c| format!("{}:{}", s.id, c))
                    })
                    .collect()
            }
            ViewKind::SubArea(k) => {
                let id = &self.net.partition.as_ref().unwrap().sub_areas[k].id;
                ["cif", "cid", "p", "q", "cap", "u"]
                    .iter()
                    .map(|c| format!("{}:{}", id, c))
                    .collect()
            }
        }
    }

    /// Installation binaries for conductors, transformers and substations.
    fn equipment(&mut self) {
        let net = self.net;
        let stages = net.stages();
        let ntypes = net.catalog.conductors.len();
        for b in 0..self.view.branches.len() {
            let mut per_type = vec![vec![None; stages]; ntypes];
            if let BranchRole::Real(g) = self.view.branches[b].role {
                let br = &net.branches[g];
                let existing_alive = br
                    .existing
                    .map(|_| aging_vector(br.existing_life, 0, stages))
                    .unwrap_or_else(|| vec![0; stages]);
                for (a, ct) in net.catalog.conductors.iter().enumerate() {
                    for t in 0..stages {
                        if existing_alive[t] == 1 {
                            continue;
                        }
                        let v = self.bin(format!("l_{}_{}_t{}", br.id, ct.id, t + 1));
                        self.m.set_priority(v, PRIO_INVEST);
                        let c = self.delta_inv[t] * ct.invest_cost * br.length_km;
                        self.obj(v, c);
                        self.cost.investment.push((v, c));
                        per_type[a][t] = Some(v);
                    }
                }
            }
            self.install.push(per_type);
        }
        let ttypes = net.catalog.transformers.len();
        let use_tr = !matches!(self.view.kind, ViewKind::SubArea(_));
        for (si, slot) in net.slots.iter().enumerate() {
            let mut per_type = vec![vec![None; stages]; ttypes];
            if use_tr {
                let existing_alive = slot
                    .existing
                    .map(|_| aging_vector(slot.existing_life, 0, stages))
                    .unwrap_or_else(|| vec![0; stages]);
                for (a, tt) in net.catalog.transformers.iter().enumerate() {
                    for t in 0..stages {
                        if existing_alive[t] == 1 {
                            continue;
                        }
                        let v = self.bin(format!("m_{}_{}_t{}", slot.id, tt.id, t + 1));
                        self.m.set_priority(v, PRIO_INVEST);
                        let c = self.delta_inv[t] * tt.invest_cost;
                        self.obj(v, c);
                        self.cost.investment.push((v, c));
                        per_type[a][t] = Some(v);
                    }
                }
            }
            let _ = si;
            self.tr_install.push(per_type);
        }
        for n in 0..self.view.nodes.len() {
            let mut builds = vec![None; stages];
            if let (NodeRole::Source, Some(g)) = (self.view.nodes[n].role, self.view.nodes[n].global) {
                let sub = net.nodes[g].substation.as_ref().unwrap();
                if !sub.existing {
                    let mut terms = Terms::new();
                    for (t, slot) in builds.iter_mut().enumerate() {
                        let v = self.bin(format!("n_{}_t{}", net.nodes[g].id, t + 1));
                        self.m.set_priority(v, PRIO_INVEST);
                        let c = self.delta_inv[t] * sub.invest_cost;
                        self.obj(v, c);
                        self.cost.investment.push((v, c));
                        *slot = Some(v);
                        terms.push((v, 1.0));
                    }
                    self.row(format!("sub_once_{}", net.nodes[g].id), terms, Sense::Le, 1.0);
                }
            }
            self.sub_build.push(builds);
        }
    }

    /// In-service expression of conductor type `a` on local branch `b` at stage `t`.
    fn conductor_alive(&self, b: usize, a: usize, t: usize) -> (Terms, f64) {
        let net = self.net;
        let stages = net.stages();
        let BranchRole::Real(g) = self.view.branches[b].role else {
            return (vec![], 0.0);
        };
        let br = &net.branches[g];
        let life = net.catalog.conductors[a].lifespan;
        let mut terms = Terms::new();
        for tau in 0..=t {
            if let Some(v) = self.install[b][a][tau] {
                if aging_vector(life, tau + 1, stages)[t] == 1 {
                    terms.push((v, 1.0));
                }
            }
        }
        let c = if br.existing == Some(a) {
            aging_vector(br.existing_life, 0, stages)[t] as f64
        } else {
            0.0
        };
        (terms, c)
    }

    fn transformer_alive(&self, si: usize, a: usize, t: usize) -> (Terms, f64) {
        let net = self.net;
        let stages = net.stages();
        let slot = &net.slots[si];
        let life = net.catalog.transformers[a].lifespan;
        let mut terms = Terms::new();
        for tau in 0..=t {
            if let Some(v) = self.tr_install[si][a][tau] {
                if aging_vector(life, tau + 1, stages)[t] == 1 {
                    terms.push((v, 1.0));
                }
            }
        }
        let c = if slot.existing == Some(a) {
            aging_vector(slot.existing_life, 0, stages)[t] as f64
        } else {
            0.0
        };
        (terms, c)
    }

    /// Substation in-service expression at local node `n`, stage `t`.
    fn substation_alive(&self, n: usize, t: usize) -> (Terms, f64) {
        let g = self.view.nodes[n].global.unwrap();
        let sub = self.net.nodes[g].substation.as_ref().unwrap();
        if sub.existing {
            return (vec![], 1.0);
        }
        let terms = (0..=t)
            .filter_map(|tau| self.sub_build[n][tau].map(|v| (v, 1.0)))
            .collect();
        (terms, 0.0)
    }

    fn stage_equipment(&mut self, t: usize) {
        let net = self.net;
        let nb = self.view.branches.len();
        let stage = t + 1;
        let mut line_alive = vec![None; nb];
        let mut line_cap = vec![None; nb];
        let mut line_rate = vec![None; nb];
        let mut eob_duration = None;
        for b in 0..nb {
            let vb = self.view.branches[b].clone();
            match vb.role {
                BranchRole::Real(g) => {
                    let br = &net.branches[g];
                    let lt = self.cont(format!("lt_{}_t{}", vb.id, stage), 0.0, 1.0);
                    let sc = self.cont(format!("sc_{}_t{}", vb.id, stage), 0.0, net.max_conductor_capacity());
                    let lam = self.cont(
                        format!("lam_{}_t{}", vb.id, stage),
                        0.0,
                        net.max_failure_rate() * br.length_km,
                    );
                    let mut ra = vec![(lt, 1.0)];
                    let mut rc = vec![(sc, 1.0)];
                    let mut rl = vec![(lam, 1.0)];
                    let (mut ca, mut cc, mut cl) = (0.0, 0.0, 0.0);
                    for (a, ct) in net.catalog.conductors.iter().enumerate() {
                        let (terms, c) = self.conductor_alive(b, a, t);
                        for &(v, w) in &terms {
                            ra.push((v, -w));
                            rc.push((v, -w * ct.capacity_mva));
                            rl.push((v, -w * ct.failure_rate * br.length_km));
                            let mc = self.delta_op[t] * ct.maint_cost * br.length_km;
                            self.obj(v, mc);
                            self.cost.maintenance.push((v, mc));
                        }
                        ca += c;
                        cc += c * ct.capacity_mva;
                        cl += c * ct.failure_rate * br.length_km;
                        self.cost.maintenance_const += c * self.delta_op[t] * ct.maint_cost * br.length_km;
                    }
                    self.row(format!("alive_{}_t{}", vb.id, stage), ra, Sense::Eq, ca);
                    self.row(format!("cap_{}_t{}", vb.id, stage), rc, Sense::Eq, cc);
                    self.row(format!("rate_{}_t{}", vb.id, stage), rl, Sense::Eq, cl);
                    line_alive[b] = Some(lt);
                    line_cap[b] = Some(sc);
                    line_rate[b] = Some(lam);
                }
                BranchRole::Eob(k) => {
                    let bx = boundary_box(net, k);
                    line_cap[b] = Some(self.cont(format!("sc_{}_t{}", vb.id, stage), 0.0, net.max_conductor_capacity()));
                    line_rate[b] = Some(self.cont(format!("lam_{}_t{}", vb.id, stage), 0.0, bx.rate));
                    eob_duration = Some(self.cont(format!("dur_{}_t{}", vb.id, stage), 0.0, bx.duration));
                }
            }
        }
        let ns = net.slots.len();
        let mut tr_alive = vec![None; ns];
        let mut tr_cap = vec![None; ns];
        if !matches!(self.view.kind, ViewKind::SubArea(_)) {
            for si in 0..ns {
                let sid = net.slots[si].id.clone();
                let ma = self.cont(format!("mt_{}_t{}", sid, stage), 0.0, 1.0);
                let cap_hi = net.catalog.transformers.iter().map(|x| x.capacity_mva).fold(0.0, f64::max);
                let sc = self.cont(format!("str_{}_t{}", sid, stage), 0.0, cap_hi);
                let mut ra = vec![(ma, 1.0)];
                let mut rc = vec![(sc, 1.0)];
                let (mut ca, mut cc) = (0.0, 0.0);
                for (a, tt) in net.catalog.transformers.iter().enumerate() {
                    let (terms, c) = self.transformer_alive(si, a, t);
                    for &(v, w) in &terms {
                        ra.push((v, -w));
                        rc.push((v, -w * tt.capacity_mva));
                        let mc = self.delta_op[t] * tt.maint_cost;
                        self.obj(v, mc);
                        self.cost.maintenance.push((v, mc));
                    }
                    ca += c;
                    cc += c * tt.capacity_mva;
                    self.cost.maintenance_const += c * self.delta_op[t] * tt.maint_cost;
                }
                self.row(format!("tralive_{}_t{}", sid, stage), ra, Sense::Eq, ca);
                self.row(format!("trcap_{}_t{}", sid, stage), rc, Sense::Eq, cc);
                tr_alive[si] = Some(ma);
                tr_cap[si] = Some(sc);
            }
            // Transformer count limited by substation presence.
            for n in 0..self.view.nodes.len() {
                if self.view.nodes[n].role != NodeRole::Source {
                    continue;
                }
                let g = self.view.nodes[n].global.unwrap();
                let sub = net.nodes[g].substation.clone().unwrap();
                let (sterms, sc) = self.substation_alive(n, t);
                let mut terms: Terms = (0..ns)
                    .filter(|&si| net.slots[si].node == g)
                    .map(|si| (tr_alive[si].unwrap(), 1.0))
                    .collect();
                for &(v, w) in &sterms {
                    terms.push((v, -w * sub.max_transformers as f64));
                    let mc = self.delta_op[t] * sub.maint_cost;
                    self.obj(v, mc * w);
                    self.cost.maintenance.push((v, mc * w));
                }
                self.cost.maintenance_const += sc * self.delta_op[t] * sub.maint_cost;
                self.row(
                    format!("trcount_{}_t{}", net.nodes[g].id, stage),
                    terms,
                    Sense::Le,
                    sc * sub.max_transformers as f64,
                );
            }
        }
        let st = &mut self.stages[t];
        st.line_alive = line_alive;
        st.line_cap = line_cap;
        st.line_rate = line_rate;
        st.eob_duration = eob_duration;
        st.tr_alive = tr_alive;
        st.tr_cap = tr_cap;
    }

    fn sources(&mut self, t: usize) {
        let nn = self.view.nodes.len();
        let mut u = vec![None; nn];
        let (lo, hi) = (self.net.voltage.min, self.net.voltage.max);
        for n in 0..nn {
            if self.view.nodes[n].role.is_source() {
                let id = self.view.nodes[n].id.clone();
                u[n] = Some(self.cont(format!("uss_{}_t{}", id, t + 1), lo, hi));
            }
        }
        self.stages[t].u_source = u;
        let mut ep = vec![None; nn];
        let mut eq = vec![None; nn];
        for n in 0..nn {
            if let NodeRole::Eln(k) = self.view.nodes[n].role {
                let bx = self.boxes[k].clone().unwrap();
                let id = self.view.nodes[n].id.clone();
                ep[n] = Some(self.cont(format!("pd_{}_t{}", id, t + 1), 0.0, bx.load_p[t]));
                eq[n] = Some(self.cont(format!("qd_{}_t{}", id, t + 1), 0.0, bx.load_q[t]));
            }
        }
        self.stages[t].eln_p = ep;
        self.stages[t].eln_q = eq;
    }

    /// Nodes whose service a fault on local branch `f` can interrupt.
    fn reachable(&self, f: usize) -> Vec<usize> {
        let region = self.view.branches[f].region;
        self.view
            .non_source()
            .filter(|&i| region.is_none() || self.view.region_of_node[i] == region)
            .collect()
    }

    fn scenarios(&mut self, t: usize) {
        let nb = self.view.branches.len();
        let mut list = vec![self.scenario(t, None)];
        for f in 0..nb {
            list.push(self.scenario(t, Some(f)));
        }
        self.stages[t].scenarios = list;
    }

    fn scenario(&mut self, t: usize, fault: Option<usize>) -> ScenarioVars {
        let net = self.net;
        let stage = t + 1;
        let sname = match fault {
            None => "NO".to_string(),
            Some(f) => format!("F{}", self.view.branches[f].id),
        };
        let nb = self.view.branches.len();
        let nn = self.view.nodes.len();
        let m = self.flow_m;
        let mut sv = ScenarioVars {
            fault,
            s: vec![None; nb],
            p_flow: vec![None; nb],
            q_flow: vec![None; nb],
            u: Vec::with_capacity(nn),
            p: vec![None; nn],
            q: vec![None; nn],
        };
        let (ulo, uhi) = (net.voltage.min, net.voltage.max);
        for n in 0..nn {
            let v = match self.stages[t].u_source[n] {
                Some(v) => v,
                None => {
                    let id = self.view.nodes[n].id.clone();
                    self.cont(format!("u_{}_{}_t{}", sname, id, stage), ulo, uhi)
                }
            };
            sv.u.push(v);
        }
        let non_source: Vec<usize> = self.view.non_source().collect();
        let kconn = non_source.len() as f64;
        let reach = fault.map(|f| self.reachable(f)).unwrap_or_default();
        if fault.is_some() {
            for &i in &reach {
                let id = self.view.nodes[i].id.clone();
                let p = self.bin(format!("p_{}_{}_t{}", sname, id, stage));
                let q = self.bin(format!("q_{}_{}_t{}", sname, id, stage));
                self.obj(p, self.opts.tie_break);
                self.obj(q, self.opts.tie_break);
                self.cost.tie_break.push((p, self.opts.tie_break));
                self.cost.tie_break.push((q, self.opts.tie_break));
                self.row(format!("qp_{}_{}_t{}", sname, id, stage), vec![(q, 1.0), (p, -1.0)], Sense::Le, 0.0);
                sv.p[i] = Some(p);
                sv.q[i] = Some(q);
            }
        }

        let mut conn = vec![None; nb];
        for b in 0..nb {
            if Some(b) == fault {
                continue;
            }
            let vb = self.view.branches[b].clone();
            let bn = format!("{}_{}_t{}", sname, vb.id, stage);
            let s = self.bin(format!("s_{}", bn));
            self.m.set_priority(s, if fault.is_none() { PRIO_TOPOLOGY } else { PRIO_RESTORE });
            let pf = self.cont(format!("P_{}", bn), -m, m);
            let qf = self.cont(format!("Q_{}", bn), -m, m);
            let fl = self.cont(format!("F_{}", bn), -kconn, kconn);
            sv.s[b] = Some(s);
            sv.p_flow[b] = Some(pf);
            sv.q_flow[b] = Some(qf);
            conn[b] = Some(fl);
            if let Some(lt) = self.stages[t].line_alive[b] {
                self.row(format!("sw_{}", bn), vec![(s, 1.0), (lt, -1.0)], Sense::Le, 0.0);
            }
            for (v, tag) in [(pf, "P"), (qf, "Q")] {
                self.row(format!("mflow{}+_{}", tag, bn), vec![(v, 1.0), (s, -m)], Sense::Le, 0.0);
                self.row(format!("mflow{}-_{}", tag, bn), vec![(v, -1.0), (s, -m)], Sense::Le, 0.0);
            }
            let sc = self.stages[t].line_cap[b].unwrap();
            for (v, tag) in [(pf, "P"), (qf, "Q")] {
                self.row(format!("cap{}+_{}", tag, bn), vec![(v, 1.0), (sc, -1.0)], Sense::Le, 0.0);
                self.row(format!("cap{}-_{}", tag, bn), vec![(v, -1.0), (sc, -1.0)], Sense::Le, 0.0);
            }
            for (sp, sq, tag) in [(1.0, 1.0, "pp"), (1.0, -1.0, "pm"), (-1.0, 1.0, "mp"), (-1.0, -1.0, "mm")] {
                self.row(
                    format!("capS{}_{}", tag, bn),
                    vec![(pf, sp), (qf, sq), (sc, -SQRT_2)],
                    Sense::Le,
                    0.0,
                );
            }
            self.row(format!("conn+_{}", bn), vec![(fl, 1.0), (s, -kconn)], Sense::Le, 0.0);
            self.row(format!("conn-_{}", bn), vec![(fl, -1.0), (s, -kconn)], Sense::Le, 0.0);
            // Voltage drop, per conductor type when the type is a decision.
            let (ui, uj) = (sv.u[vb.from], sv.u[vb.to]);
            match vb.role {
                BranchRole::Real(g) => {
                    let br = &net.branches[g];
                    let mv = voltage_big_m(net, br.length_km);
                    for (a, ct) in net.catalog.conductors.iter().enumerate() {
                        let (alive, c) = self.conductor_alive(b, a, t);
                        if alive.is_empty() && c == 0.0 {
                            continue;
                        }
                        let kr = 2.0 * ct.r * br.length_km / net.base_mva;
                        let kx = 2.0 * ct.x * br.length_km / net.base_mva;
                        // U_j - U_i + kr P + kx Q within +-M[(1-s) + (1-g_a)]
                        let slack_const = if alive.is_empty() { 1.0 - c } else { 1.0 };
                        let mut up = vec![(uj, 1.0), (ui, -1.0), (pf, kr), (qf, kx), (s, mv)];
                        let mut dn = vec![(uj, -1.0), (ui, 1.0), (pf, -kr), (qf, -kx), (s, mv)];
                        for &(v, w) in &alive {
                            up.push((v, mv * w));
                            dn.push((v, mv * w));
                        }
                        let rhs = mv + mv * slack_const;
                        self.row(format!("volt+_{}_{}", ct.id, bn), up, Sense::Le, rhs);
                        self.row(format!("volt-_{}_{}", ct.id, bn), dn, Sense::Le, rhs);
                    }
                }
                BranchRole::Eob(_) => {
                    let mv = net.voltage.max - net.voltage.min;
                    self.row(format!("volt+_{}", bn), vec![(uj, 1.0), (ui, -1.0), (s, mv)], Sense::Le, mv);
                    self.row(format!("volt-_{}", bn), vec![(uj, -1.0), (ui, 1.0), (s, mv)], Sense::Le, mv);
                }
            }
        }

        // Transformer limits on feeder heads.
        for fi in 0..self.view.feeders.len() {
            let vf = self.view.feeders[fi].clone();
            let Some(si) = vf.slot else { continue };
            let b = vf.head;
            let (Some(pf), Some(qf), Some(fl)) = (sv.p_flow[b], sv.q_flow[b], conn[b]) else {
                continue;
            };
            let slot = &net.slots[si];
            let vb = &self.view.branches[b];
            let sub_local = self.view.local_node(slot.node).unwrap();
            let sign = if vb.from == sub_local { 1.0 } else { -1.0 };
            let str_ = self.stages[t].tr_cap[si].unwrap();
            let ma = self.stages[t].tr_alive[si].unwrap();
            let bn = format!("{}_{}_t{}", sname, vb.id, stage);
            self.row(format!("trP_{}", bn), vec![(pf, sign), (str_, -1.0)], Sense::Le, 0.0);
            self.row(format!("trQ_{}", bn), vec![(qf, sign), (str_, -1.0)], Sense::Le, 0.0);
            for (sp, sq, tag) in [(1.0, 1.0, "pp"), (1.0, -1.0, "pm"), (-1.0, 1.0, "mp"), (-1.0, -1.0, "mm")] {
                self.row(
                    format!("trS{}_{}", tag, bn),
                    vec![(pf, sp), (qf, sq), (str_, -SQRT_2)],
                    Sense::Le,
                    0.0,
                );
            }
            self.row(format!("trconn+_{}", bn), vec![(fl, 1.0), (ma, -kconn)], Sense::Le, 0.0);
            self.row(format!("trconn-_{}", bn), vec![(fl, -1.0), (ma, -kconn)], Sense::Le, 0.0);
        }

        // Node balances and connectivity.
        let mut count: Terms = Vec::new();
        for b in 0..nb {
            if let Some(s) = sv.s[b] {
                count.push((s, 1.0));
            }
        }
        for &i in &non_source {
            let id = self.view.nodes[i].id.clone();
            let nm = format!("{}_{}_t{}", sname, id, stage);
            let mut bp = Terms::new();
            let mut bq = Terms::new();
            let mut bf = Terms::new();
            for b in 0..nb {
                let vb = &self.view.branches[b];
                let dir = if vb.to == i {
                    1.0
                } else if vb.from == i {
                    -1.0
                } else {
                    continue;
                };
                if let (Some(pf), Some(qf), Some(fl)) = (sv.p_flow[b], sv.q_flow[b], conn[b]) {
                    bp.push((pf, dir));
                    bq.push((qf, dir));
                    bf.push((fl, dir));
                }
            }
            let q = sv.q[i];
            let (mut rp, mut rq) = (0.0, 0.0);
            match self.view.nodes[i].role {
                NodeRole::Load => {
                    let g = self.view.nodes[i].global.unwrap();
                    let (lp, lq) = (net.nodes[g].load_p[t], net.nodes[g].load_q[t]);
                    rp = lp;
                    rq = lq;
                    if let Some(q) = q {
                        bp.push((q, lp));
                        bq.push((q, lq));
                    }
                }
                NodeRole::Eln(k) => {
                    let bx = self.boxes[k].clone().unwrap();
                    let pd = self.stages[t].eln_p[i].unwrap();
                    let qd = self.stages[t].eln_q[i].unwrap();
                    match q {
                        None => {
                            bp.push((pd, -1.0));
                            bq.push((qd, -1.0));
                        }
                        Some(q) => {
                            for (d, cap, tag, row) in [(pd, bx.load_p[t], "yp", &mut bp), (qd, bx.load_q[t], "yq", &mut bq)] {
                                let y = self.cont(format!("{}_{}", tag, nm), 0.0, cap);
                                self.m.add_constraint(format!("{}a_{}", tag, nm), vec![(y, 1.0), (q, cap)], Sense::Le, cap);
                                self.m.add_constraint(format!("{}b_{}", tag, nm), vec![(y, 1.0), (d, -1.0)], Sense::Le, 0.0);
                                self.m.add_constraint(format!("{}c_{}", tag, nm), vec![(y, 1.0), (d, -1.0), (q, cap)], Sense::Ge, 0.0);
                                row.push((y, -1.0));
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
            self.row(format!("balP_{}", nm), bp, Sense::Eq, rp);
            self.row(format!("balQ_{}", nm), bq, Sense::Eq, rq);
            match q {
                Some(q) => {
                    bf.push((q, 1.0));
                    count.push((q, 1.0));
                }
                None => {}
            }
            self.row(format!("balF_{}", nm), bf, Sense::Eq, 1.0);
            // A supplied node has at least one closed incident branch.
            let mut deg: Terms = (0..nb)
                .filter(|&b| {
                    let vb = &self.view.branches[b];
                    vb.from == i || vb.to == i
                })
                .filter_map(|b| sv.s[b].map(|s| (s, 1.0)))
                .collect();
            if let Some(q) = q {
                deg.push((q, 1.0));
            }
            self.row(format!("deg_{}", nm), deg, Sense::Ge, 1.0);
        }
        if fault.is_some() {
            self.row(format!("radial_{}_t{}", sname, stage), count, Sense::Eq, kconn);
        }
        sv
    }

    /// Normal-state feeder affiliation and radiality.
    fn affiliation(&mut self, t: usize) {
        let stage = t + 1;
        let nf = self.view.feeders.len();
        let nb = self.view.branches.len();
        let nn = self.view.nodes.len();
        let no = self.stages[t].scenarios[0].clone();
        let mut hn = vec![vec![None; nn]; nf];
        let mut hb = vec![vec![None; nb]; nf];
        for f in 0..nf {
            let fid = self.view.feeders[f].id.clone();
            for i in self.view.non_source().collect::<Vec<_>>() {
                let id = self.view.nodes[i].id.clone();
                hn[f][i] = Some(self.cont(format!("h_{}_{}_t{}", fid, id, stage), 0.0, 1.0));
            }
            for b in 0..nb {
                let bid = self.view.branches[b].id.clone();
                let other_head = (0..nf).any(|g| g != f && self.view.feeders[g].head == b);
                let hi = if other_head { 0.0 } else { 1.0 };
                hb[f][b] = Some(self.cont(format!("hb_{}_{}_t{}", fid, bid, stage), 0.0, hi));
            }
        }
        for f in 0..nf {
            let fid = self.view.feeders[f].id.clone();
            for b in 0..nb {
                let vb = self.view.branches[b].clone();
                let s = no.s[b].unwrap();
                let h = hb[f][b].unwrap();
                let nm = format!("{}_{}_t{}", fid, vb.id, stage);
                for k in [vb.from, vb.to] {
                    if let Some(hk) = hn[f][k] {
                        // |h_b - h_k| <= 1 - s
                        self.row(format!("aff+_{}_{}", self.view.nodes[k].id, nm), vec![(h, 1.0), (hk, -1.0), (s, 1.0)], Sense::Le, 1.0);
                        self.row(format!("aff-_{}_{}", self.view.nodes[k].id, nm), vec![(hk, 1.0), (h, -1.0), (s, 1.0)], Sense::Le, 1.0);
                    }
                }
                if self.view.feeders[f].head == b {
                    self.row(format!("head_{}", nm), vec![(h, 1.0), (s, -1.0)], Sense::Eq, 0.0);
                } else {
                    self.row(format!("hs_{}", nm), vec![(h, 1.0), (s, -1.0)], Sense::Le, 0.0);
                }
            }
        }
        for i in self.view.non_source().collect::<Vec<_>>() {
            let terms: Terms = (0..nf).map(|f| (hn[f][i].unwrap(), 1.0)).collect();
            // Every node is supplied in normal operation.
            self.row(format!("hsum_{}_t{}", self.view.nodes[i].id, stage), terms, Sense::Eq, 1.0);
        }
        let mut count = Terms::new();
        for b in 0..nb {
            let terms: Terms = (0..nf).map(|f| (hb[f][b].unwrap(), 1.0)).collect();
            self.row(format!("hbsum_{}_t{}", self.view.branches[b].id, stage), terms, Sense::Le, 1.0);
            count.push((no.s[b].unwrap(), 1.0));
        }
        for f in 0..nf {
            for i in self.view.non_source().collect::<Vec<_>>() {
                count.push((hn[f][i].unwrap(), -1.0));
            }
        }
        self.row(format!("radial_NO_t{}", stage), count, Sense::Eq, 0.0);

        // Affected-node lower bounds in fault scenarios.
        let scen = self.stages[t].scenarios.clone();
        for sv in scen.iter().skip(1) {
            let xy = sv.fault.unwrap();
            let bid = self.view.branches[xy].id.clone();
            for i in 0..nn {
                let Some(p) = sv.p[i] else { continue };
                for f in 0..nf {
                    let row = vec![(p, 1.0), (hn[f][i].unwrap(), -1.0), (hb[f][xy].unwrap(), -1.0)];
                    let nm = format!("aff_F{}_{}_{}_t{}", bid, self.view.nodes[i].id, self.view.feeders[f].id, stage);
                    self.row(nm, row, Sense::Ge, -1.0);
                }
            }
            // Implied by the rows above for integral topologies: a closed
            // faulted branch interrupts its endpoints and their closed neighbours.
            let (x, y) = (self.view.branches[xy].from, self.view.branches[xy].to);
            let sxy = no.s[xy].unwrap();
            for (end, other) in [(x, y), (y, x)] {
                if let Some(p) = sv.p[end] {
                    let nm = format!("affe_F{}_{}_t{}", bid, self.view.nodes[end].id, stage);
                    self.row(nm, vec![(p, 1.0), (sxy, -1.0)], Sense::Ge, 0.0);
                }
                if self.view.nodes[end].role.is_source() {
                    continue;
                }
                for b in 0..nb {
                    let vb = &self.view.branches[b];
                    if b == xy || !(vb.from == end || vb.to == end) {
                        continue;
                    }
                    let i = if vb.from == end { vb.to } else { vb.from };
                    if i == other {
                        continue;
                    }
                    let Some(p) = sv.p[i] else { continue };
                    let nm = format!("affn_F{}_{}_{}_t{}", bid, vb.id, self.view.nodes[i].id, stage);
                    self.row(nm, vec![(p, 1.0), (sxy, -1.0), (no.s[b].unwrap(), -1.0)], Sense::Ge, -1.0);
                }
            }
        }
        self.stages[t].h_node = hn;
        self.stages[t].h_branch = hb;
    }

    /// Source-free components of the candidate graph after removing `removed`
    /// (and `absent`), each with the removed branches on its boundary.
    fn orphan_sets(&self, absent: Option<usize>, removed: &[usize]) -> Vec<(Vec<usize>, Vec<usize>)> {
        let nn = self.view.nodes.len();
        let nb = self.view.branches.len();
        let open = |b: usize| Some(b) == absent || removed.contains(&b);
        let mut comp = vec![usize::MAX; nn];
        let mut stack: Vec<usize> = (0..nn).filter(|&i| self.view.nodes[i].role.is_source()).collect();
        for &i in &stack {
            comp[i] = 0;
        }
        let spread = |comp: &mut Vec<usize>, stack: &mut Vec<usize>, id: usize| {
            while let Some(u) = stack.pop() {
                for b in 0..nb {
                    let vb = &self.view.branches[b];
                    if open(b) || !(vb.from == u || vb.to == u) {
                        continue;
                    }
                    let v = if vb.from == u { vb.to } else { vb.from };
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        stack.push(v);
                    }
                }
            }
        };
        spread(&mut comp, &mut stack, 0);
        let mut out = Vec::new();
        let mut next = 1;
        for i in 0..nn {
            if comp[i] != usize::MAX {
                continue;
            }
            comp[i] = next;
            let mut st = vec![i];
            spread(&mut comp, &mut st, next);
            let members: Vec<usize> = (0..nn).filter(|&j| comp[j] == next).collect();
            let boundary: Vec<usize> = removed
                .iter()
                .copied()
                .filter(|&b| {
                    let vb = &self.view.branches[b];
                    (comp[vb.from] == next) != (comp[vb.to] == next)
                })
                .collect();
            out.push((members, boundary));
            next += 1;
        }
        out
    }

    /// Connectivity cuts over small branch removals: every supplied node set
    /// needs a closed branch on its boundary towards the sources.
    fn cut_sets(&mut self, t: usize) {
        let stage = t + 1;
        let nb = self.view.branches.len();
        let scen = self.stages[t].scenarios.clone();
        let mut removals: Vec<Vec<usize>> = (0..nb).map(|b| vec![b]).collect();
        for a in 0..nb {
            for b in a + 1..nb {
                removals.push(vec![a, b]);
            }
        }
        for sv in &scen {
            let mut seen = std::collections::BTreeSet::new();
            let tag = match sv.fault {
                None => "NO".to_string(),
                Some(f) => format!("F{}", self.view.branches[f].id),
            };
            let empty = Vec::new();
            let sets: Vec<&Vec<usize>> = match sv.fault {
                None => removals.iter().collect(),
                Some(_) => std::iter::once(&empty).chain(removals.iter().take(nb)).collect(),
            };
            for r in sets {
                if sv.fault.map_or(false, |f| r.contains(&f)) {
                    continue;
                }
                for (members, boundary) in self.orphan_sets(sv.fault, r) {
                    let terms: Terms = boundary.iter().map(|&b| (sv.s[b].unwrap(), 1.0)).collect();
                    if sv.fault.is_none() {
                        if terms.is_empty() || !seen.insert((boundary.clone(), usize::MAX)) {
                            continue;
                        }
                        let nm = format!("cut_NO_{}_t{}", self.cut_name(&boundary), stage);
                        self.row(nm, terms, Sense::Ge, 1.0);
                        continue;
                    }
                    for &i in &members {
                        if !seen.insert((boundary.clone(), i)) {
                            continue;
                        }
                        let mut row = terms.clone();
                        if let Some(q) = sv.q[i] {
                            row.push((q, 1.0));
                        }
                        if row.is_empty() {
                            continue;
                        }
                        let nm = format!("cut_{}_{}_{}_t{}", tag, self.cut_name(&boundary), self.view.nodes[i].id, stage);
                        self.row(nm, row, Sense::Ge, 1.0);
                    }
                }
            }
        }
    }

    fn cut_name(&self, boundary: &[usize]) -> String {
        if boundary.is_empty() {
            return "none".into();
        }
        boundary.iter().map(|&b| self.view.branches[b].id.clone()).collect::<Vec<_>>().join("+")
    }

    fn reliability(&mut self, t: usize) {
        let stage = t + 1;
        let nn = self.view.nodes.len();
        let scen = self.stages[t].scenarios.clone();
        let mut cif_terms: Vec<Terms> = vec![Vec::new(); nn];
        let mut cid_terms: Vec<Terms> = vec![Vec::new(); nn];
        for sv in scen.iter().skip(1) {
            let xy = sv.fault.unwrap();
            let vb = self.view.branches[xy].clone();
            let lam = self.stages[t].line_rate[xy].unwrap();
            let lam_hi = self.m.vars[lam.0].upper;
            let dur = self.stages[t].eob_duration;
            for i in 0..nn {
                let (Some(p), Some(q)) = (sv.p[i], sv.q[i]) else { continue };
                let nm = format!("F{}_{}_t{}", vb.id, self.view.nodes[i].id, stage);
                let a = self.product(format!("ap_{}", nm), lam, lam_hi, p);
                cif_terms[i].push((a, 1.0));
                match vb.role {
                    BranchRole::Real(_) => {
                        let bq = self.product(format!("aq_{}", nm), lam, lam_hi, q);
                        cid_terms[i].push((a, vb.switch_time_h));
                        cid_terms[i].push((bq, vb.repair_time_h - vb.switch_time_h));
                    }
                    BranchRole::Eob(_) => {
                        let d = dur.unwrap();
                        let dhi = self.m.vars[d.0].upper;
                        let np = self.product(format!("dp_{}", nm), d, dhi, p);
                        cid_terms[i].push((np, 1.0));
                    }
                }
            }
        }
        let mut cif = vec![None; nn];
        let mut cid = vec![None; nn];
        for i in self.view.non_source().collect::<Vec<_>>() {
            let id = self.view.nodes[i].id.clone();
            let (hf, hd) = match self.view.nodes[i].role {
                NodeRole::Eln(k) => {
                    let bx = self.boxes[k].clone().unwrap();
                    (bx.rate, bx.duration)
                }
                _ => (f64::INFINITY, f64::INFINITY),
            };
            let cf = self.cont(format!("cif_{}_t{}", id, stage), 0.0, hf);
            let cd = self.cont(format!("cid_{}_t{}", id, stage), 0.0, hd);
            let mut rf = vec![(cf, 1.0)];
            rf.extend(cif_terms[i].iter().map(|&(v, c)| (v, -c)));
            let mut rd = vec![(cd, 1.0)];
            rd.extend(cid_terms[i].iter().map(|&(v, c)| (v, -c)));
            self.row(format!("cifdef_{}_t{}", id, stage), rf, Sense::Eq, 0.0);
            self.row(format!("ciddef_{}_t{}", id, stage), rd, Sense::Eq, 0.0);
            if let (NodeRole::Load, Some(g)) = (self.view.nodes[i].role, self.view.nodes[i].global) {
                let c = self.delta_op[t] * self.net.horizon.eens_weight * self.net.nodes[g].load_p[t];
                if c != 0.0 {
                    self.obj(cd, c);
                    self.cost.eens.push((cd, c));
                }
            }
            cif[i] = Some(cf);
            cid[i] = Some(cd);
        }
        for a in self.view.areas.clone() {
            let Some(limit) = a.limit else { continue };
            let total: f64 = a
                .nodes
                .iter()
                .map(|&i| self.view.nodes[i].global.map_or(0, |g| self.net.nodes[g].customers) as f64)
                .sum();
            if total <= 0.0 {
                continue;
            }
            let terms: Terms = a
                .nodes
                .iter()
                .filter_map(|&i| {
                    let g = self.view.nodes[i].global?;
                    let nc = self.net.nodes[g].customers as f64;
                    (nc > 0.0).then(|| (cid[i].unwrap(), nc))
                })
                .collect();
            self.row(format!("saidi_{}_t{}", a.id, stage), terms, Sense::Le, limit * total);
        }
        self.stages[t].cif = cif;
        self.stages[t].cid = cid;
    }

    /// `w = v * z` for `v` in `[0, hi]` and binary `z`.
    fn product(&mut self, name: String, v: VarId, hi: f64, z: VarId) -> VarId {
        let w = self.cont(name.clone(), 0.0, hi);
        let mb = product_big_m(hi, 1.0);
        self.row(format!("{}_a", name), vec![(w, 1.0), (z, -mb)], Sense::Le, 0.0);
        self.row(format!("{}_b", name), vec![(w, 1.0), (v, -1.0)], Sense::Le, 0.0);
        self.row(format!("{}_c", name), vec![(w, 1.0), (v, -1.0), (z, -mb)], Sense::Ge, -mb);
        w
    }

    fn coordination(&mut self, t: usize) {
        let st = &self.stages[t];
        let mut coord = Vec::new();
        match self.view.kind {
            ViewKind::Centralized => {}
            ViewKind::Backbone => {
                let p = self.net.partition.as_ref().unwrap();
                for (k, s) in p.sub_areas.iter().enumerate() {
                    let e = self
                        .view
                        .nodes
                        .iter()
                        .position(|n| n.role == NodeRole::Eln(k))
                        .unwrap();
                    let b = self.view.local_branch(s.boundary).unwrap();
                    coord.extend([
                        st.cif[e].unwrap(),
                        st.cid[e].unwrap(),
                        st.eln_p[e].unwrap(),
                        st.eln_q[e].unwrap(),
                        st.line_cap[b].unwrap(),
                        st.scenarios[0].u[e],
                    ]);
                }
            }
            ViewKind::SubArea(_) => {
                let no = &st.scenarios[0];
                coord.extend([
                    st.line_rate[0].unwrap(),
                    st.eob_duration.unwrap(),
                    no.p_flow[0].unwrap(),
                    no.q_flow[0].unwrap(),
                    st.line_cap[0].unwrap(),
                    st.u_source[0].unwrap(),
                ]);
            }
        }
        self.stages[t].coord = coord;
    }
}
