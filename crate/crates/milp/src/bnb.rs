//! Best-bound branch-and-bound.
//!
//! Children are evaluated eagerly by a warm dual re-solve of the parent's
//! relaxation. Node order: lowest bound, then deepest, then oldest.
//! Branching picks the most fractional variable of the highest priority
//! class that has one; ties go to the lowest index. A rounding dive runs at
//! the root and periodically afterwards to supply incumbents.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::{debug, warn};
use microlp::{ComparisonOp, Solution};

use crate::error::MilpError;
use crate::lp::{engine_err, relax, solve_lp_bounds, LpStatus};
use crate::model::{evaluate_point, MilpModel};

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub node_limit: usize,
    /// Relative optimality gap, measured against `max(1, |incumbent|)`.
    pub rel_gap: f64,
    pub feas_tol: f64,
    pub int_tol: f64,
    /// Nodes between rounding dives; 0 disables diving.
    pub dive_interval: usize,
    /// Open nodes that keep their factorised relaxation; the rest are
    /// rebuilt from their bound list when popped.
    pub stored_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
            rel_gap: 1e-6,
            feas_tol: 1e-7,
            int_tol: 1e-6,
            dive_interval: 200,
            stored_nodes: 512,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// Node limit reached with an incumbent; `bound` is the best open bound.
    NodeLimit,
    /// Node limit reached before any integer point was found.
    NodeLimitNoIncumbent,
    Infeasible,
    Unbounded,
}

impl MilpStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, MilpStatus::Optimal | MilpStatus::NodeLimit)
    }
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Empty unless `status.has_solution()`.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub nodes: usize,
    /// Largest bound or row violation of `x`.
    pub max_violation: f64,
    /// Nodes whose relaxation value fell below the parent's beyond tolerance.
    pub bound_violations: usize,
}

impl MilpSolution {
    fn empty(status: MilpStatus, bound: f64, nodes: usize) -> Self {
        Self {
            status,
            x: vec![],
            objective: if status == MilpStatus::Unbounded {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            bound,
            nodes,
            max_violation: 0.0,
            bound_violations: 0,
        }
    }

    pub fn gap(&self) -> f64 {
        if !self.status.has_solution() {
            return f64::INFINITY;
        }
        (self.objective - self.bound).max(0.0) / self.objective.abs().max(1.0)
    }
}

/// A branching decision: variable index and its tightened bounds.
type BoundChange = (usize, f64, f64);

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    changes: Vec<BoundChange>,
    sol: Option<Solution>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is popped first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    x: Vec<f64>,
    objective: f64,
}

struct Search<'a> {
    model: &'a MilpModel,
    cfg: &'a SolverConfig,
    handles: Vec<microlp::Variable>,
    /// Integral variables sorted by priority class, highest first.
    classes: Vec<Vec<usize>>,
    incumbent: Option<Incumbent>,
}

enum Resolve {
    Solved(Solution),
    Infeasible,
    Unbounded,
}

impl<'a> Search<'a> {
    fn value(&self, sol: &Solution, i: usize) -> f64 {
        sol.var_value_raw(self.handles[i])
    }

    /// Most fractional variable of the first class that has one.
    fn pick(&self, sol: &Solution) -> Option<(usize, f64)> {
        for class in &self.classes {
            let mut best: Option<(usize, f64, f64)> = None;
            for &i in class {
                let v = self.value(sol, i);
                let d = (v - v.floor()).min(v.ceil() - v);
                if d > self.cfg.int_tol && best.map_or(true, |(_, _, bd)| d > bd) {
                    best = Some((i, v, d));
                }
            }
            if let Some((i, v, _)) = best {
                return Some((i, v));
            }
        }
        None
    }

    /// Warm-started bound change on top of `sol`, whose own changes are
    /// `path`. An engine failure falls back to a fresh relaxation.
    fn apply(&self, sol: Solution, path: &[BoundChange], change: BoundChange) -> Result<Resolve, MilpError> {
        match self.apply_warm(sol, change) {
            Err(MilpError::Engine(e)) => {
                warn!("{}: warm start failed ({}), rebuilding node", self.model.name, e);
                let mut changes = path.to_vec();
                changes.push(change);
                self.rebuild(&changes)
            }
            r => r,
        }
    }

    fn apply_warm(&self, sol: Solution, (i, lo, hi): BoundChange) -> Result<Resolve, MilpError> {
        let var = &self.model.vars[i];
        let h = self.handles[i];
        let outcome = if lo == hi && (lo <= var.lower || hi >= var.upper || var.kind == crate::VarKind::Binary) {
            sol.fix_var(h, lo)
        } else if hi < var.upper {
            sol.add_constraint([(h, 1.0)], ComparisonOp::Le, hi)
        } else {
            sol.add_constraint([(h, 1.0)], ComparisonOp::Ge, lo)
        };
        match outcome {
            Ok(o) => o
                .into_solution()
                .map(Resolve::Solved)
                .map_err(|_| MilpError::Engine("node relaxation interrupted".into())),
            Err(microlp::Error::Infeasible) => Ok(Resolve::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(Resolve::Unbounded),
            Err(e) => Err(engine_err(e)),
        }
    }

    /// Fresh relaxation with every change of `changes` applied as a bound.
    fn rebuild(&self, changes: &[BoundChange]) -> Result<Resolve, MilpError> {
        let mut bounds: Vec<(f64, f64)> = self.model.vars.iter().map(|v| (v.lower, v.upper)).collect();
        for &(i, lo, hi) in changes {
            bounds[i].0 = bounds[i].0.max(lo);
            bounds[i].1 = bounds[i].1.min(hi);
        }
        if bounds.iter().any(|&(lo, hi)| lo > hi) {
            return Ok(Resolve::Infeasible);
        }
        match relax(self.model, Some(&bounds)).problem.solve() {
            Ok(o) => o
                .into_solution()
                .map(Resolve::Solved)
                .map_err(|_| MilpError::Engine("node relaxation interrupted".into())),
            Err(microlp::Error::Infeasible) => Ok(Resolve::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(Resolve::Unbounded),
            Err(e) => Err(engine_err(e)),
        }
    }

    fn offer(&mut self, x: Vec<f64>, obj: f64, nodes: usize, how: &str) {
        if self.incumbent.as_ref().map_or(true, |inc| obj < inc.objective) {
            debug!("{}: incumbent {:.9} ({}) at node {}", self.model.name, obj, how, nodes);
            self.incumbent = Some(Incumbent { x, objective: obj });
        }
    }

    /// Depth-first rounding dive from `start`; `None` when it dead-ends.
    fn dive(&self, start: &Solution, path: &[BoundChange]) -> Result<Option<(Vec<f64>, f64)>, MilpError> {
        let limit = 2 * self.classes.iter().map(|c| c.len()).sum::<usize>() + 1;
        let mut cur = start.clone();
        let mut path = path.to_vec();
        for _ in 0..limit {
            let Some((i, v)) = self.pick(&cur) else {
                let x: Vec<f64> = self.handles.iter().map(|&h| cur.var_value_raw(h)).collect();
                return complete(self.model, self.cfg, &x, &self.integral());
            };
            let near = v.round();
            let far = if near > v { v.floor() } else { v.ceil() };
            match self.apply(cur.clone(), &path, (i, near, near))? {
                Resolve::Solved(s) => {
                    cur = s;
                    path.push((i, near, near));
                }
                _ => match self.apply(cur, &path, (i, far, far))? {
                    Resolve::Solved(s) => {
                        cur = s;
                        path.push((i, far, far));
                    }
                    _ => return Ok(None),
                },
            }
            if let Some(inc) = &self.incumbent {
                if cur.objective() + self.model.obj_offset >= cutoff(inc.objective, self.cfg) {
                    return Ok(None);
                }
            }
        }
        Ok(None)
    }

    fn integral(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.classes.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }
}

pub fn solve_milp(model: &MilpModel, cfg: &SolverConfig) -> Result<MilpSolution, MilpError> {
    solve_milp_with_hint(model, cfg, None)
}

/// Like [`solve_milp`], seeded with a candidate point. Integer entries of the
/// hint are rounded and held fixed while the continuous part is re-optimised;
/// a feasible completion becomes the starting incumbent.
pub fn solve_milp_with_hint(
    model: &MilpModel,
    cfg: &SolverConfig,
    hint: Option<&[f64]>,
) -> Result<MilpSolution, MilpError> {
    model.validate()?;
    let integral: Vec<usize> = (0..model.num_vars())
        .filter(|&i| model.vars[i].kind.is_integral())
        .collect();
    let mut prios: Vec<i32> = integral.iter().map(|&i| model.vars[i].priority).collect();
    prios.sort_unstable_by(|a, b| b.cmp(a));
    prios.dedup();
    let classes: Vec<Vec<usize>> = prios
        .iter()
        .map(|&p| integral.iter().copied().filter(|&i| model.vars[i].priority == p).collect())
        .collect();

    let rel = relax(model, None);
    let mut search = Search {
        model,
        cfg,
        handles: rel.handles,
        classes,
        incumbent: None,
    };
    if let Some(h) = hint {
        if h.len() == model.num_vars() {
            if let Some((x, obj)) = complete(model, cfg, h, &integral)? {
                search.offer(x, obj, 0, "hint");
            }
        }
    }

    let root = match rel.problem.solve() {
        Ok(o) => o
            .into_solution()
            .map_err(|_| MilpError::Engine("root relaxation interrupted".into()))?,
        Err(microlp::Error::Infeasible) => {
            return Ok(MilpSolution::empty(MilpStatus::Infeasible, f64::INFINITY, 1));
        }
        Err(microlp::Error::Unbounded) => {
            return Ok(MilpSolution::empty(MilpStatus::Unbounded, f64::NEG_INFINITY, 1));
        }
        Err(e) => return Err(engine_err(e)),
    };

    let offset = model.obj_offset;
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 1usize;
    let mut stored = 1usize;
    let mut bound_violations = 0usize;
    heap.push(Node {
        bound: root.objective() + offset,
        depth: 0,
        seq,
        changes: Vec::new(),
        sol: Some(root),
    });
    // Smallest bound among nodes discarded by the cutoff test, if any.
    let mut pruned_bound = f64::INFINITY;
    let mut limit_hit = false;
    let mut since_dive = usize::MAX;

    while let Some(mut node) = heap.pop() {
        if let Some(inc) = &search.incumbent {
            if node.bound >= cutoff(inc.objective, cfg) {
                pruned_bound = pruned_bound.min(node.bound);
                heap.clear();
                break;
            }
        }
        let sol = match node.sol.take() {
            Some(s) => {
                stored -= 1;
                s
            }
            None => match search.rebuild(&node.changes)? {
                Resolve::Solved(s) => s,
                Resolve::Infeasible => continue,
                Resolve::Unbounded => {
                    return Ok(MilpSolution::empty(MilpStatus::Unbounded, f64::NEG_INFINITY, nodes));
                }
            },
        };

        let Some((bi, bv)) = search.pick(&sol) else {
            let x: Vec<f64> = search.handles.iter().map(|&h| sol.var_value_raw(h)).collect();
            search.offer(x, node.bound, nodes, "node");
            continue;
        };

        if cfg.dive_interval > 0 && since_dive >= cfg.dive_interval {
            since_dive = 0;
            if let Some((x, obj)) = search.dive(&sol, &node.changes)? {
                search.offer(x, obj, nodes, "dive");
            }
            if let Some(inc) = &search.incumbent {
                if node.bound >= cutoff(inc.objective, cfg) {
                    pruned_bound = pruned_bound.min(node.bound);
                    continue;
                }
            }
        }
        since_dive = since_dive.saturating_add(1);

        if nodes >= cfg.node_limit {
            node.sol = Some(sol);
            heap.push(node);
            limit_hit = true;
            break;
        }

        let lo = bv.floor();
        let hi = bv.ceil();
        let var = &model.vars[bi];
        for down in [true, false] {
            nodes += 1;
            let change = if down { (bi, var.lower, lo) } else { (bi, hi, var.upper) };
            let change = if var.kind == crate::VarKind::Binary {
                let v = if down { lo } else { hi };
                (bi, v, v)
            } else {
                change
            };
            let child = match search.apply(sol.clone(), &node.changes, change)? {
                Resolve::Solved(s) => s,
                Resolve::Infeasible => continue,
                Resolve::Unbounded => {
                    return Ok(MilpSolution::empty(MilpStatus::Unbounded, f64::NEG_INFINITY, nodes));
                }
            };
            let b = child.objective() + offset;
            if b < node.bound - 1e-6 * node.bound.abs().max(1.0) {
                bound_violations += 1;
                warn!("{}: child bound {} below parent bound {}", model.name, b, node.bound);
            }
            if let Some(inc) = &search.incumbent {
                if b >= cutoff(inc.objective, cfg) {
                    pruned_bound = pruned_bound.min(b);
                    continue;
                }
            }
            seq += 1;
            let mut changes = node.changes.clone();
            changes.push(change);
            let keep = stored < cfg.stored_nodes;
            if keep {
                stored += 1;
            }
            heap.push(Node {
                bound: b.max(node.bound),
                depth: node.depth + 1,
                seq,
                changes,
                sol: keep.then_some(child),
            });
        }
    }

    let open_bound = heap.peek().map_or(f64::INFINITY, |n| n.bound);

    let Some(inc) = search.incumbent else {
        let status = if limit_hit {
            MilpStatus::NodeLimitNoIncumbent
        } else {
            MilpStatus::Infeasible
        };
        return Ok(MilpSolution::empty(status, open_bound.min(pruned_bound), nodes));
    };

    // Snap integral values and re-optimise the continuous part for a clean point.
    let (x, _) = match complete(model, cfg, &inc.x, &integral)? {
        Some((x, obj)) if obj <= inc.objective + 1e-9 * inc.objective.abs().max(1.0) => (x, obj),
        _ => (inc.x, inc.objective),
    };
    let ev = evaluate_point(model, &x, cfg.int_tol);
    let bound = open_bound.min(pruned_bound).min(ev.objective);
    Ok(MilpSolution {
        status: if limit_hit {
            MilpStatus::NodeLimit
        } else {
            MilpStatus::Optimal
        },
        x,
        objective: ev.objective,
        bound,
        nodes,
        max_violation: ev.max_violation,
        bound_violations,
    })
}

fn cutoff(incumbent: f64, cfg: &SolverConfig) -> f64 {
    incumbent - cfg.rel_gap * incumbent.abs().max(1.0)
}

/// Rounds integral entries of `x`, fixes them, and solves for the best
/// continuous completion. Returns `None` when no completion exists.
fn complete(
    model: &MilpModel,
    cfg: &SolverConfig,
    x: &[f64],
    integral: &[usize],
) -> Result<Option<(Vec<f64>, f64)>, MilpError> {
    let mut bounds: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lower, v.upper)).collect();
    for &i in integral {
        let r = x[i].round();
        if r < model.vars[i].lower - cfg.int_tol || r > model.vars[i].upper + cfg.int_tol {
            return Ok(None);
        }
        bounds[i] = (r, r);
    }
    let lp = match solve_lp_bounds(model, Some(&bounds)) {
        Ok(lp) => lp,
        // A heuristic completion; failing it only loses a candidate.
        Err(MilpError::Engine(e)) => {
            warn!("{}: completion failed ({})", model.name, e);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    if lp.status != LpStatus::Optimal {
        return Ok(None);
    }
    let mut xs = lp.x;
    for &i in integral {
        xs[i] = bounds[i].0;
    }
    let ev = evaluate_point(model, &xs, cfg.int_tol);
    if !ev.feasible(1e-6) {
        return Ok(None);
    }
    Ok(Some((xs, ev.objective)))
}
