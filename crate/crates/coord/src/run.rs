use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use gridplan_core::builder::{BuildOptions, CostBreakdown};
use gridplan_core::{Network, Plan};
use gridplan_milp::SolverConfig;
use rayon::prelude::*;

use crate::config::CoordConfig;
use crate::hull::{minimize_over_hull, HullPoint, VertexSet};
use crate::pairing::Pairing;
use crate::repair::{backbone_moves, capacity_moves, repair, serving_moves, Repaired};
use crate::state::{accelerate_multipliers, serious_step_update, update_penalty, CoordinationState};
use crate::subproblem::{evaluate_dual, subproblems, DualResult, Subproblem};
use crate::CoordError;

pub const VERTEX_CAP: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub sum_eps: f64,
    /// Empty on the first iteration.
    pub eta: Option<f64>,
    /// Penalty used in this iteration.
    pub rho: f64,
    pub serious: bool,
    pub restart: bool,
    /// Best assembled plan so far, tie-break excluded.
    pub incumbent_cost: Option<f64>,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{:.12e}", x)).unwrap_or_default()
}

impl ConvergenceTrace {
    pub const HEADER: &'static str = "k,sumEps,eta,rho,seriousStep,restart,incumbentCost,wallMs";

    fn render(&self, wall: bool) -> String {
        let mut out = String::new();
        if wall {
            out.push_str(Self::HEADER);
        } else {
            out.push_str(Self::HEADER.trim_end_matches(",wallMs"));
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{:.12e},{},{:.12e},{},{},{}",
                r.k,
                r.sum_eps,
                opt(r.eta),
                r.rho,
                r.serious as u8,
                r.restart as u8,
                opt(r.incumbent_cost)
            );
            if wall {
                let _ = write!(out, ",{}", r.wall_ms);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.render(true)
    }

    /// Every column except the wall clock.
    pub fn to_csv_untimed(&self) -> String {
        self.render(false)
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let head = lines.next().ok_or("empty trace")?;
        let timed = head == Self::HEADER;
        if !timed && head != Self::HEADER.trim_end_matches(",wallMs") {
            return Err(format!("unexpected trace header {:?}", head));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{}: {:?}", e, s));
        let optn = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != if timed { 8 } else { 7 } {
                return Err(format!("bad trace row {:?}", line));
            }
            rows.push(TraceRow {
                k: f[0].parse().map_err(|e| format!("{}", e))?,
                sum_eps: num(f[1])?,
                eta: optn(f[2])?,
                rho: num(f[3])?,
                serious: f[4] == "1",
                restart: f[5] == "1",
                incumbent_cost: optn(f[6])?,
                wall_ms: if timed { f[7].parse().map_err(|e| format!("{}", e))? } else { 0 },
            });
        }
        Ok(Self { rows })
    }

    /// First iteration whose incumbent is within `rel` of the final one.
    pub fn reach_index(&self, rel: f64) -> Option<usize> {
        let last = self.rows.iter().rev().find_map(|r| r.incumbent_cost)?;
        self.rows
            .iter()
            .find(|r| r.incumbent_cost.map_or(false, |c| (c - last).abs() <= rel * last.abs()))
            .map(|r| r.k)
    }
}

/// Run-time checks of the method's invariants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Audit {
    /// Summed dual lower bound after each serious step.
    pub lower_bounds: Vec<f64>,
    /// Penalty at every iteration, including the value after the last update.
    pub rho_history: Vec<f64>,
    pub projections: usize,
    /// Projections whose result was not bitwise paired.
    pub projection_failures: usize,
    /// Block updates that raised the augmented Lagrangian beyond 1e-8.
    pub descent_failures: usize,
    pub inexact_hull: usize,
    pub inexact_dual: usize,
    /// Dual values above the model value of an existing vertex.
    pub dual_violations: usize,
    /// Vertices rejected by the feasibility check.
    pub rejected_vertices: usize,
}

#[derive(Clone, Debug)]
pub struct CoordinationResult {
    pub plan: Plan,
    pub cost: CostBreakdown,
    /// Summed block objectives of the plan, tie-break included.
    pub objective: f64,
    pub lower_bound: f64,
    /// `(objective - lower_bound) / max(1, |objective|)`.
    pub final_gap: f64,
    pub sum_eps: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: ConvergenceTrace,
    pub audit: Audit,
    pub repaired: Repaired,
    /// Binary variables per block, backbone first.
    pub binaries: Vec<usize>,
    pub vertex_counts: Vec<usize>,
}

fn dual_all(
    subs: &[Subproblem],
    w: &[Vec<f64>],
    hints: &[Option<Vec<f64>>],
    solver: &SolverConfig,
) -> Result<Vec<DualResult>, CoordError> {
    (0..subs.len())
        .into_par_iter()
        .map(|b| evaluate_dual(&subs[b], &w[b], solver, hints[b].as_deref()))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Independent solves of every block with zero multipliers; each vertex set
/// starts from its block's solution.
pub fn initialize(
    subs: &[Subproblem],
    pairing: &Pairing,
    cfg: &CoordConfig,
    solver: &SolverConfig,
) -> Result<(CoordinationState, Vec<VertexSet>, f64), CoordError> {
    let zero: Vec<Vec<f64>> = pairing.sizes.iter().map(|&n| vec![0.0; n]).collect();
    let hints = vec![None; subs.len()];
    let init = dual_all(subs, &zero, &hints, solver).map_err(|e| match e {
        CoordError::Subproblem { name, reason } => CoordError::Subproblem {
            name,
            reason: format!("initial solve failed: {}", reason),
        },
        e => e,
    })?;
    let mut sets = Vec::new();
    let mut slices = Vec::new();
    let mut primal = 0.0;
    for (sub, d) in subs.iter().zip(init) {
        let mut set = VertexSet::new(VERTEX_CAP);
        if !sub.feasible(&d.x) {
            return Err(CoordError::Subproblem {
                name: sub.name.clone(),
                reason: "initial solution failed the feasibility check".into(),
            });
        }
        primal += d.f;
        slices.push(d.qx.clone());
        set.add(d.x, d.qx, d.f, 0, None);
        sets.push(set);
    }
    let mut st = CoordinationState::new(&pairing.sizes, cfg);
    st.z = pairing.project(&slices);
    Ok((st, sets, primal))
}

fn augmented(hp: &HullPoint, rho: f64, z: &[f64]) -> f64 {
    let sq: f64 = hp.qx.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    hp.value + 0.5 * rho * sq
}

fn block_lagrangian(f: f64, qx: &[f64], w: &[f64], z: &[f64], rho: f64) -> f64 {
    let mut v = f;
    for i in 0..qx.len() {
        let r = qx[i] - z[i];
        v += w[i] * r + 0.5 * rho * r * r;
    }
    v
}

struct Incumbents<'a> {
    net: &'a Network,
    subs: &'a [Subproblem],
    pairing: &'a Pairing,
    solver: &'a SolverConfig,
    cache: HashMap<(bool, Vec<Vec<bool>>), Option<f64>>,
    best: Option<Repaired>,
    /// Vertex ids behind the best plan.
    best_ids: Vec<Option<u64>>,
    /// Cost of the last plan the local search started from.
    polished: Option<f64>,
}

impl Incumbents<'_> {
    /// Repairs a vertex combination. With `free`, only the backbone vertex
    /// matters and sub-areas answer it with their best equipment.
    fn offer(&mut self, choice: &[(&[f64], Option<u64>)], free: bool) -> Result<(), CoordError> {
        let key: Vec<Vec<bool>> = self
            .subs
            .iter()
            .zip(choice)
            .take(if free { 1 } else { choice.len() })
            .map(|(s, (x, _))| s.investment_bits(x))
            .collect();
        let key = (free, key);
        if self.cache.contains_key(&key) {
            return Ok(());
        }
        let xs: Vec<&[f64]> = choice.iter().map(|c| c.0).collect();
        let r = repair(self.net, self.subs, self.pairing, &xs, free, self.solver)?;
        log::debug!(
            "offer free={} -> {:?}",
            free,
            r.as_ref().map(|r| (r.cost.total, r.banded, r.extended))
        );
        self.cache.insert(key, r.as_ref().map(|r| r.cost.total));
        if let Some(r) = r {
            // Consistent plans rank ahead of banded ones.
            let better = self.best.as_ref().map_or(true, |b| {
                (r.banded, b.banded) == (false, true)
                    || (r.banded == b.banded && r.cost.total < b.cost.total - 1e-9)
            });
            if better {
                log::info!("new incumbent {:.6}", r.cost.total);
                self.best = Some(r);
                self.best_ids = choice.iter().map(|c| c.1).collect();
            }
        }
        Ok(())
    }

    /// Local search over single backbone equipment changes around the best
    /// consistent plan; sub-areas answer each change with their best
    /// equipment. Repeats until no change helps.
    fn polish(&mut self, w: &[f64]) -> Result<(), CoordError> {
        loop {
            let Some(best) = self.best.as_ref().filter(|b| !b.banded) else {
                return Ok(());
            };
            if self.polished.map_or(false, |c| c == best.cost.total) {
                return Ok(());
            }
            let before = best.cost.total;
            let xs = best.x.clone();
            let ids = self.best_ids.clone();
            self.polished = Some(before);
            let mut moves = serving_moves(self.subs, &xs, self.solver)?;
            moves.extend(capacity_moves(self.net, &self.subs[0], &xs[0], w, self.solver)?);
            moves.extend(backbone_moves(&self.subs[0], &xs[0], self.solver)?);
            for xb in moves {
                let choice: Vec<(&[f64], Option<u64>)> = std::iter::once((xb.as_slice(), None))
                    .chain(xs[1..].iter().zip(&ids[1..]).map(|(x, id)| (x.as_slice(), *id)))
                    .collect();
                self.offer(&choice, true)?;
            }
            if self.best.as_ref().map_or(true, |b| b.cost.total >= before - 1e-9) {
                return Ok(());
            }
        }
    }
}

pub fn run_coordination(net: &Network, cfg: &CoordConfig) -> Result<CoordinationResult, CoordError> {
    run_coordination_with(net, cfg, &SolverConfig::default())
}

/// As [`run_coordination`], with the MILP settings used for every
/// subproblem solve.
pub fn run_coordination_with(
    net: &Network,
    cfg: &CoordConfig,
    solver: &SolverConfig,
) -> Result<CoordinationResult, CoordError> {
    cfg.validate().map_err(CoordError::Config)?;
    if net.partition.is_none() {
        return Err(CoordError::NoPartition);
    }
    let subs = subproblems(net, &BuildOptions::default());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CoordError::Config(e.to_string()))?;
    pool.install(|| run_blocks(net, &subs, cfg, solver))
}

/// The coordination loop over prebuilt blocks (backbone first).
pub fn run_blocks(
    net: &Network,
    subs: &[Subproblem],
    cfg: &CoordConfig,
    solver: &SolverConfig,
) -> Result<CoordinationResult, CoordError> {
    let start = Instant::now();
    let pairing = Pairing::for_network(net);
    assert_eq!(pairing.blocks(), subs.len(), "one subproblem per block");
    let nb = subs.len();
    let (mut st, mut sets, primal0) = initialize(subs, &pairing, cfg, solver)?;
    let eps_tol = cfg.eps_tol.unwrap_or(1e-4 * (1.0 + primal0.abs()));
    let mut audit = Audit::default();
    let mut trace = ConvergenceTrace::default();
    let mut inc = Incumbents {
        net,
        subs,
        pairing: &pairing,
        solver,
        cache: HashMap::new(),
        best: None,
        best_ids: vec![None; nb],
        polished: None,
    };
    {
        let choice: Vec<(&[f64], Option<u64>)> =
            sets.iter().map(|s| (s.vertices[0].x.as_slice(), Some(s.vertices[0].id))).collect();
        inc.offer(&choice, false)?;
        inc.offer(&choice, true)?;
    }
    let mut converged = false;
    let mut sum_eps = f64::INFINITY;
    let mut iterations = 0;
    for k in 1..=cfg.k_max {
        st.k = k;
        iterations = k;
        let rho = st.rho;
        audit.rho_history.push(rho);
        let m = st.w_hat.clone();

        // Gauss-Seidel passes: backbone, then the sub-areas side by side.
        let mut hull: Vec<Option<HullPoint>> = vec![None; nb];
        for pass in 0..cfg.t_max {
            st.inner = pass + 1;
            let before: f64 = match hull.iter().all(|h| h.is_some()) {
                true => (0..nb).map(|b| hull[b].as_ref().unwrap().value).sum(),
                false => f64::INFINITY,
            };
            let hb = minimize_over_hull(&sets[0], &m[0], &st.z[0], rho);
            let rest: Vec<HullPoint> = (1..nb)
                .into_par_iter()
                .map(|b| minimize_over_hull(&sets[b], &m[b], &st.z[b], rho))
                .collect();
            hull[0] = Some(hb);
            for (i, h) in rest.into_iter().enumerate() {
                hull[i + 1] = Some(h);
            }
            let after: f64 = (0..nb).map(|b| hull[b].as_ref().unwrap().value).sum();
            if after > before + 1e-8 * (1.0 + before.abs()) {
                audit.descent_failures += 1;
            }
            audit.inexact_hull += hull.iter().filter(|h| !h.as_ref().unwrap().exact).count();
            let slices: Vec<Vec<f64>> = hull.iter().map(|h| h.as_ref().unwrap().qx.clone()).collect();
            st.z = pairing.project(&slices);
            audit.projections += 1;
            if !pairing.is_member(&st.z) {
                audit.projection_failures += 1;
            }
            for b in 0..nb {
                let h = hull[b].as_mut().unwrap();
                h.value = block_lagrangian(h.f, &h.qx, &m[b], &st.z[b], rho);
            }
        }
        let hull: Vec<HullPoint> = hull.into_iter().map(|h| h.unwrap()).collect();
        for (set, h) in sets.iter_mut().zip(&hull) {
            for (v, &t) in set.vertices.iter_mut().zip(&h.theta) {
                if t > 0.0 {
                    v.last_used = k;
                }
            }
        }
        let phi_hat: Vec<f64> = (0..nb).map(|b| augmented(&hull[b], rho, &st.z[b])).collect();
        let w_trial: Vec<Vec<f64>> = (0..nb)
            .map(|b| {
                m[b].iter()
                    .zip(hull[b].qx.iter().zip(&st.z[b]))
                    .map(|(w, (q, z))| w + rho * (q - z))
                    .collect()
            })
            .collect();

        // Dual evaluations, seeded with the best known vertex.
        let hints: Vec<Option<Vec<f64>>> = (0..nb)
            .map(|b| {
                let val = |v: &crate::hull::Vertex| {
                    v.f + v.qx.iter().zip(&w_trial[b]).map(|(q, w)| q * w).sum::<f64>()
                };
                sets[b]
                    .vertices
                    .iter()
                    .min_by(|a, c| val(a).partial_cmp(&val(c)).unwrap().then(a.id.cmp(&c.id)))
                    .map(|v| v.x.clone())
            })
            .collect();
        let duals = dual_all(subs, &w_trial, &hints, solver)?;
        let mut dual_ids = Vec::with_capacity(nb);
        for b in 0..nb {
            let d = &duals[b];
            if !d.exact {
                audit.inexact_dual += 1;
            }
            for v in &sets[b].vertices {
                let lv = v.f + v.qx.iter().zip(&w_trial[b]).map(|(q, w)| q * w).sum::<f64>();
                if d.value > lv + 1e-6 * (1.0 + lv.abs()) {
                    audit.dual_violations += 1;
                }
            }
            if subs[b].feasible(&d.x) {
                let (id, _) = sets[b].add(d.x.clone(), d.qx.clone(), d.f, k, inc.best_ids[b]);
                dual_ids.push(Some(id));
            } else {
                audit.rejected_vertices += 1;
                dual_ids.push(None);
            }
        }
        let phi_trial: Vec<f64> = duals.iter().map(|d| d.value).collect();
        let step = serious_step_update(&mut st, &phi_hat, &phi_trial, &w_trial, cfg.gamma, eps_tol);
        let mut restart = false;
        if step.serious {
            audit.lower_bounds.push(st.lower_bound());
            if cfg.accelerate {
                restart = accelerate_multipliers(&mut st, cfg.delta);
            } else {
                st.w_hat = st.w.clone();
            }
        }
        if let Some(eta) = step.eta {
            st.rho = update_penalty(st.rho, eta, st.rho_min, st.rho_max);
        }
        sum_eps = step.sum_eps;

        // Incumbents: best vertex per block at the center multipliers, and
        // the fresh dual solutions.
        let best_at_w: Vec<usize> = (0..nb)
            .map(|b| {
                let val = |v: &crate::hull::Vertex| {
                    v.f + v.qx.iter().zip(&st.w[b]).map(|(q, w)| q * w).sum::<f64>()
                };
                (0..sets[b].len())
                    .min_by(|&a, &c| {
                        val(&sets[b].vertices[a])
                            .partial_cmp(&val(&sets[b].vertices[c]))
                            .unwrap()
                            .then(a.cmp(&c))
                    })
                    .unwrap()
            })
            .collect();
        let choice: Vec<(&[f64], Option<u64>)> = (0..nb)
            .map(|b| {
                let v = &sets[b].vertices[best_at_w[b]];
                (v.x.as_slice(), Some(v.id))
            })
            .collect();
        inc.offer(&choice, false)?;
        inc.offer(&choice, true)?;
        let fresh: Vec<(&[f64], Option<u64>)> =
            (0..nb).map(|b| (duals[b].x.as_slice(), dual_ids[b])).collect();
        inc.offer(&fresh, false)?;
        inc.offer(&fresh, true)?;
        inc.polish(&st.w[0])?;

        trace.rows.push(TraceRow {
            k,
            sum_eps: step.sum_eps,
            eta: step.eta,
            rho,
            serious: step.serious,
            restart,
            incumbent_cost: inc.best.as_ref().map(|r| r.cost.total),
            wall_ms: start.elapsed().as_millis(),
        });
        log::debug!(
            "k {} sumEps {:.4e} eta {:?} rho {:.3e} serious {} restart {} lb {:.6} inc {:?}",
            k,
            step.sum_eps,
            step.eta,
            rho,
            step.serious,
            restart,
            st.lower_bound(),
            inc.best.as_ref().map(|r| r.cost.total)
        );
        if step.converged {
            converged = true;
            break;
        }
    }
    audit.rho_history.push(st.rho);
    let best = inc.best.take().ok_or(CoordError::NoIncumbent)?;
    let lower_bound = st.lower_bound();
    Ok(CoordinationResult {
        plan: best.plan.clone(),
        cost: best.cost.clone(),
        objective: best.objective,
        final_gap: (best.objective - lower_bound) / best.objective.abs().max(1.0),
        lower_bound,
        sum_eps,
        converged,
        iterations,
        trace,
        audit,
        binaries: subs.iter().map(|s| s.model().num_binaries()).collect(),
        vertex_counts: sets.iter().map(|s| s.len()).collect(),
        repaired: best,
    })
}
