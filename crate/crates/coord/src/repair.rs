//! Turns one vertex per block into one consistent network plan: equipment is
//! taken from the vertices and boundary operation is re-optimized with each
//! side pinned to the other's values.

use gridplan_core::builder::CostBreakdown;
use gridplan_core::plan::{extract_plan, merge_plans};
use gridplan_core::{Network, Plan};
use gridplan_milp::{solve_milp_with_hint, MilpModel, MilpStatus, SolverConfig, VarId};
use rayon::prelude::*;

use crate::pairing::{Pairing, PER_AREA};
use crate::subproblem::Subproblem;
use crate::CoordError;

/// Relative width of the fallback pin band.
pub const PIN_BAND: f64 = 0.01;
const CONSISTENT: f64 = 1e-7;
const ROUNDS: usize = 4;

#[derive(Clone, Debug)]
pub struct Repaired {
    pub x: Vec<Vec<f64>>,
    /// Sum over blocks, tie-break excluded.
    pub cost: CostBreakdown,
    /// Sum of block objectives, tie-break included.
    pub objective: f64,
    pub plan: Plan,
    /// Largest pairwise boundary disagreement left.
    pub mismatch: f64,
    /// Some block needed the fallback pin band.
    pub banded: bool,
    /// Some block needed equipment beyond its vertex.
    pub extended: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Equipment {
    Fixed,
    AtLeast,
    Free,
}

#[derive(Clone, Copy)]
struct Pin {
    var: VarId,
    value: f64,
    /// Only a lower bound.
    floor: bool,
}

impl Pin {
    fn exact(var: VarId, value: f64) -> Self {
        Self { var, value, floor: false }
    }
}

struct Attempt {
    x: Vec<f64>,
    banded: bool,
    extended: bool,
}

fn pinned(
    sub: &Subproblem,
    equipment: &[(VarId, bool)],
    mode: Equipment,
    pins: &[Pin],
    band: f64,
    cfg: &SolverConfig,
    hint: Option<&[f64]>,
) -> Result<Option<Vec<f64>>, CoordError> {
    let mut m: MilpModel = sub.model().clone();
    for &(v, on) in equipment {
        let val = if on { 1.0 } else { 0.0 };
        match mode {
            Equipment::Fixed => m.fix(v, val),
            Equipment::AtLeast => m.set_bounds(v, val, 1.0),
            Equipment::Free => {}
        }
    }
    for pin in pins {
        let (v, val) = (pin.var, pin.value);
        let var = &m.vars[v.idx()];
        let (lo0, hi0) = (var.lower, var.upper);
        let d = band * val.abs();
        let mut lo = (val - d).max(lo0);
        let mut hi = if pin.floor { hi0 } else { (val + d).min(hi0) };
        if lo > hi {
            // Values a rounding error outside the bounds snap onto them.
            if lo - hi > CONSISTENT * (1.0 + val.abs()) {
                return Ok(None);
            }
            lo = val.clamp(lo0, hi0);
            hi = lo;
        }
        m.set_bounds(v, lo, hi);
    }
    let sol = solve_milp_with_hint(&m, cfg, hint)?;
    Ok(match sol.status {
        MilpStatus::Optimal | MilpStatus::NodeLimit => Some(sol.x),
        _ => None,
    })
}

/// Tries each equipment mode with exact pins, then each again within the
/// band.
fn solve_block(
    sub: &Subproblem,
    vertex: &[f64],
    pins: &[Pin],
    modes: &[Equipment],
    cfg: &SolverConfig,
) -> Result<Option<Attempt>, CoordError> {
    let bits = sub.investment_bits(vertex);
    let equipment: Vec<(VarId, bool)> = sub.built.atlas.investment_vars().into_iter().zip(bits).collect();
    for band in [0.0, PIN_BAND] {
        for &mode in modes {
            if let Some(x) = pinned(sub, &equipment, mode, pins, band, cfg, Some(vertex))? {
                if band > 0.0 {
                    log::debug!("{}: pins held only within the band", sub.name);
                }
                let extended = mode != Equipment::Fixed && sub.investment_bits(&x) != sub.investment_bits(vertex);
                return Ok(Some(Attempt {
                    x,
                    banded: band > 0.0,
                    extended,
                }));
            }
        }
    }
    Ok(None)
}

// Components a sub-area takes from the backbone, and the reverse. The
// boundary voltage is a single backbone degree of freedom shared by all
// sub-areas, so in the first round the backbone only has to reach each
// sub-area's voltage from above; the sub-areas then take it exactly.
const FROM_BACKBONE: [&[usize]; 2] = [&[0, 1, 4], &[0, 1, 4, 5]];
const FROM_SUBAREA: [usize; 2] = [2, 3];
const VOLTAGE: usize = 5;

/// `choice[b]` is the vertex of block `b` (backbone first). Equipment beyond
/// a vertex is added only when its pins cannot be met otherwise. With
/// `free_subareas`, sub-area equipment is re-optimized against the pinned
/// backbone values and the sub-area vertices only seed the solves; the
/// backbone may then also drop equipment.
pub fn repair(
    net: &Network,
    subs: &[Subproblem],
    pairing: &Pairing,
    choice: &[&[f64]],
    free_subareas: bool,
    cfg: &SolverConfig,
) -> Result<Option<Repaired>, CoordError> {
    let nsub = subs.len() - 1;
    let stages = net.stages();
    let bb = &subs[0];
    let mut xb = choice[0].to_vec();
    let mut xs: Vec<Vec<f64>> = choice[1..].iter().map(|c| c.to_vec()).collect();
    let mut banded = false;
    let mut extended = false;
    let bb_index = |t: usize, k: usize, c: usize| t * PER_AREA * nsub + PER_AREA * k + c;
    let sa_modes: &[Equipment] = if free_subareas {
        &[Equipment::Free]
    } else {
        &[Equipment::Fixed, Equipment::AtLeast]
    };
    let bb_modes: &[Equipment] = if free_subareas {
        &[Equipment::Fixed, Equipment::AtLeast, Equipment::Free]
    } else {
        &[Equipment::Fixed, Equipment::AtLeast]
    };
    let mut done = false;
    for round in 0..ROUNDS {
        let from_bb = FROM_BACKBONE[round.min(1)];
        let qb = bb.q(&xb);
        let results: Vec<Result<Option<Attempt>, CoordError>> = (0..nsub)
            .into_par_iter()
            .map(|k| {
                let sub = &subs[k + 1];
                let mut pins = Vec::new();
                for t in 0..stages {
                    for &c in from_bb {
                        pins.push(Pin::exact(sub.coord[t * PER_AREA + c], qb[bb_index(t, k, c)]));
                    }
                }
                solve_block(sub, &xs[k], &pins, sa_modes, cfg)
            })
            .collect();
        for (k, r) in results.into_iter().enumerate() {
            match r? {
                Some(a) => {
                    banded |= a.banded;
                    extended |= a.extended;
                    xs[k] = a.x;
                }
                None => return Ok(None),
            }
        }
        let qs: Vec<Vec<f64>> = (0..nsub).map(|k| subs[k + 1].q(&xs[k])).collect();
        let mut pins = Vec::new();
        for t in 0..stages {
            for k in 0..nsub {
                for c in FROM_SUBAREA {
                    pins.push(Pin::exact(bb.coord[bb_index(t, k, c)], qs[k][t * PER_AREA + c]));
                }
                if round == 0 {
                    pins.push(Pin {
                        var: bb.coord[bb_index(t, k, VOLTAGE)],
                        value: qs[k][t * PER_AREA + VOLTAGE],
                        floor: true,
                    });
                }
            }
        }
        // First try to keep the backbone values the sub-areas were given.
        let mut full = pins.clone();
        for t in 0..stages {
            for k in 0..nsub {
                for &c in from_bb {
                    full.push(Pin::exact(bb.coord[bb_index(t, k, c)], qb[bb_index(t, k, c)]));
                }
            }
        }
        let equipment: Vec<(VarId, bool)> = bb
            .built
            .atlas
            .investment_vars()
            .into_iter()
            .zip(bb.investment_bits(&xb))
            .collect();
        if let Some(x) = pinned(bb, &equipment, Equipment::Fixed, &full, 0.0, cfg, Some(&xb))? {
            xb = x;
            if round > 0 {
                done = true;
                break;
            }
            continue;
        }
        match solve_block(bb, &xb.clone(), &pins, bb_modes, cfg)? {
            Some(a) => {
                banded |= a.banded;
                extended |= a.extended;
                xb = a.x;
            }
            None => return Ok(None),
        }
        let mut slices = vec![bb.q(&xb)];
        slices.extend(qs);
        if round > 0 && pairing.mismatch(&slices) <= CONSISTENT {
            done = true;
            break;
        }
    }
    let mut slices = vec![bb.q(&xb)];
    slices.extend((0..nsub).map(|k| subs[k + 1].q(&xs[k])));
    let mismatch = pairing.mismatch(&slices);
    if !done && mismatch > CONSISTENT {
        // The last backbone solve was free on the pinned-from-backbone
        // components; accept only a band-sized disagreement.
        let tol = slices[0].iter().fold(1.0f64, |a, v| a.max(v.abs())) * PIN_BAND;
        if mismatch > tol {
            return Ok(None);
        }
        banded = true;
    }
    let mut x = vec![xb];
    x.extend(xs);
    let mut cost = CostBreakdown::default();
    let mut objective = 0.0;
    let mut parts = Vec::new();
    for (sub, xi) in subs.iter().zip(&x) {
        cost = cost.add(&sub.built.cost(xi));
        objective += sub.f(xi);
        parts.push(extract_plan(net, &sub.built, xi, 1e-6)?);
    }
    let mut plan = merge_plans(net, &parts)?;
    if let Some(p) = &net.partition {
        for (t, sp) in plan.stages.iter_mut().enumerate() {
            for (k, s) in p.sub_areas.iter().enumerate() {
                let v: Vec<f64> = (0..PER_AREA).map(|c| slices[k + 1][t * PER_AREA + c]).collect();
                sp.boundary.insert(s.id.clone(), v);
            }
        }
    }
    Ok(Some(Repaired {
        x,
        cost,
        objective,
        plan,
        mismatch,
        banded,
        extended,
    }))
}

/// Backbone solutions one equipment change away from `x`: each conductor,
/// transformer or substation group is switched off or moved to a single
/// alternative, with the rest of the equipment held fixed.
pub fn backbone_moves(sub: &Subproblem, x: &[f64], cfg: &SolverConfig) -> Result<Vec<Vec<f64>>, CoordError> {
    let atlas = &sub.built.atlas;
    let groups: Vec<Vec<VarId>> = atlas
        .install
        .iter()
        .chain(&atlas.tr_install)
        .map(|g| g.iter().flatten().flatten().copied().collect::<Vec<_>>())
        .chain(atlas.sub_build.iter().map(|g| g.iter().flatten().copied().collect()))
        .filter(|g: &Vec<VarId>| !g.is_empty())
        .collect();
    let current: Vec<(VarId, bool)> = atlas.investment_vars().into_iter().map(|v| (v, x[v.idx()] > 0.5)).collect();
    let mut candidates: Vec<Vec<(VarId, bool)>> = Vec::new();
    for g in &groups {
        let now: Vec<bool> = g.iter().map(|v| x[v.idx()] > 0.5).collect();
        let options = std::iter::once(None).chain(g.iter().copied().map(Some));
        for on in options {
            let pattern: Vec<bool> = g.iter().map(|v| Some(*v) == on).collect();
            if pattern == now {
                continue;
            }
            let eq = current
                .iter()
                .map(|&(v, b)| match g.iter().position(|u| *u == v) {
                    Some(i) => (v, pattern[i]),
                    None => (v, b),
                })
                .collect();
            candidates.push(eq);
        }
    }
    let solved = candidates
        .par_iter()
        .map(|eq| pinned(sub, eq, Equipment::Fixed, &[], 0.0, cfg, None))
        .collect::<Vec<_>>();
    let mut out = Vec::new();
    for s in solved {
        if let Some(xb) = s? {
            out.push(xb);
        }
    }
    Ok(out)
}

/// Backbone solutions at multipliers `w` with one boundary capacity held
/// at or below each smaller conductor rating, equipment free.
pub fn capacity_moves(
    net: &Network,
    sub: &Subproblem,
    x: &[f64],
    w: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<Vec<f64>>, CoordError> {
    let mut levels: Vec<f64> = net.catalog.conductors.iter().map(|c| c.capacity_mva).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut jobs = Vec::new();
    for (i, v) in sub.coord.iter().enumerate() {
        if i % PER_AREA != 4 {
            continue;
        }
        for &l in levels.iter().filter(|&&l| l < x[v.idx()] - CONSISTENT) {
            jobs.push((*v, l));
        }
    }
    let solved = jobs
        .par_iter()
        .map(|&(v, l)| {
            let mut m = sub.model().clone();
            for (u, &c) in sub.coord.iter().zip(w) {
                m.add_obj(*u, c);
            }
            let lo = m.vars[v.idx()].lower;
            m.set_bounds(v, lo, l);
            let sol = solve_milp_with_hint(&m, cfg, None)?;
            Ok(match sol.status {
                MilpStatus::Optimal | MilpStatus::NodeLimit => Some(sol.x),
                _ => None,
            })
        })
        .collect::<Vec<Result<_, CoordError>>>();
    let mut out = Vec::new();
    for s in solved {
        if let Some(xb) = s? {
            out.push(xb);
        }
    }
    Ok(out)
}

/// Cheapest backbones, equipment free, that serve the sub-area flows of
/// `x`; once with everything else open and once also keeping the boundary
/// capacities.
pub fn serving_moves(subs: &[Subproblem], x: &[Vec<f64>], cfg: &SolverConfig) -> Result<Vec<Vec<f64>>, CoordError> {
    let bb = &subs[0];
    let nsub = subs.len() - 1;
    let stages = bb.coord.len() / (PER_AREA * nsub.max(1));
    let mut flows = Vec::new();
    let mut caps = Vec::new();
    for k in 0..nsub {
        let q = subs[k + 1].q(&x[k + 1]);
        for t in 0..stages {
            let at = |c: usize| bb.coord[t * PER_AREA * nsub + PER_AREA * k + c];
            for c in FROM_SUBAREA {
                flows.push(Pin::exact(at(c), q[t * PER_AREA + c]));
            }
            caps.push(Pin {
                var: at(4),
                value: q[t * PER_AREA + 4],
                floor: true,
            });
        }
    }
    let with_caps: Vec<Pin> = flows.iter().chain(&caps).copied().collect();
    let solved = [flows, with_caps]
        .par_iter()
        .map(|pins| pinned(bb, &[], Equipment::Free, pins, 0.0, cfg, None))
        .collect::<Vec<_>>();
    let mut out = Vec::new();
    for s in solved {
        if let Some(xb) = s? {
            out.push(xb);
        }
    }
    Ok(out)
}
