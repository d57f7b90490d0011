//! Brute-force reference solvers for small random models.

#![allow(dead_code)]

use gridplan_milp::{MilpModel, Sense, VarId, VarKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random bounded model with `nbin` binaries followed by `ncont`
/// continuous variables in `[0, 4]`. Rows are built around a random point,
/// so the model is always feasible.
pub fn random_model(seed: u64, nbin: usize, ncont: usize, rows: usize) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MilpModel::new(format!("rand{}", seed));
    let mut x0 = Vec::new();
    for i in 0..nbin {
        let v = m.add_binary(format!("b{}", i));
        m.set_obj(v, rng.gen_range(-5.0..5.0));
        x0.push(rng.gen_range(0..2) as f64);
    }
    for i in 0..ncont {
        let v = m.add_continuous(format!("y{}", i), 0.0, 4.0);
        m.set_obj(v, rng.gen_range(-3.0..3.0));
        x0.push(rng.gen_range(0.0..4.0));
    }
    let n = nbin + ncont;
    for r in 0..rows {
        let coef: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.7) { rng.gen_range(-4.0..4.0) } else { 0.0 })
            .collect();
        let act: f64 = coef.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let slack = rng.gen_range(0.0..2.0);
        let terms: Vec<_> = coef.iter().enumerate().map(|(i, &a)| (VarId(i), a)).collect();
        if rng.gen_bool(0.5) {
            m.add_constraint(format!("r{}", r), terms, Sense::Le, act + slack);
        } else {
            m.add_constraint(format!("r{}", r), terms, Sense::Ge, act - slack);
        }
    }
    m
}

fn row_ok(m: &MilpModel, x: &[f64], tol: f64) -> bool {
    m.cons.iter().all(|c| c.violation(x) <= tol)
        && m.vars.iter().zip(x).all(|(v, &xi)| xi >= v.lower - tol && xi <= v.upper + tol)
}

/// Minimum over basic solutions of the continuous variables `free` with the
/// others held at `x`. Every variable must be bounded.
fn best_basic(m: &MilpModel, x: &[f64], free: &[usize]) -> Option<f64> {
    let n = free.len();
    if n == 0 {
        return row_ok(m, x, 1e-9).then(|| m.objective_value(x));
    }
    // Each candidate hyperplane as (coefficients over `free`, rhs).
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &m.cons {
        let mut a = vec![0.0; n];
        let mut rhs = c.rhs;
        for &(v, coef) in &c.terms {
            match free.iter().position(|&f| f == v.idx()) {
                Some(j) => a[j] = coef,
                None => rhs -= coef * x[v.idx()],
            }
        }
        planes.push((a, rhs));
    }
    for (j, &f) in free.iter().enumerate() {
        for b in [m.vars[f].lower, m.vars[f].upper] {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a, b));
        }
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    choose(planes.len(), n, 0, &mut pick, &mut |idx| {
        let a = DMatrix::from_fn(n, n, |r, c| planes[idx[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[idx[r]].1);
        let Some(sol) = a.lu().solve(&b) else { return };
        if sol.iter().any(|v| !v.is_finite()) {
            return;
        }
        let mut y = x.to_vec();
        for (j, &f) in free.iter().enumerate() {
            y[f] = sol[j];
        }
        if row_ok(m, &y, 1e-9) {
            let v = m.objective_value(&y);
            if best.map_or(true, |b| v < b) {
                best = Some(v);
            }
        }
    });
    best
}

fn choose(n: usize, k: usize, from: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in from..n {
        if n - i < k - pick.len() {
            break;
        }
        pick.push(i);
        choose(n, k, i + 1, pick, f);
        pick.pop();
    }
}

/// LP optimum by enumerating basic solutions. Integrality is ignored.
pub fn enumerate_lp(m: &MilpModel) -> Option<f64> {
    let free: Vec<usize> = (0..m.num_vars()).collect();
    best_basic(m, &vec![0.0; m.num_vars()], &free)
}

/// MILP optimum over all `2^k` binary assignments, each completed by
/// [`best_basic`] on the continuous part.
pub fn enumerate_milp(m: &MilpModel) -> Option<f64> {
    let bins: Vec<usize> = (0..m.num_vars()).filter(|&i| m.vars[i].kind == VarKind::Binary).collect();
    let cont: Vec<usize> = (0..m.num_vars()).filter(|&i| m.vars[i].kind == VarKind::Continuous).collect();
    assert!(bins.len() <= 16, "enumeration is exponential");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut x = vec![0.0; m.num_vars()];
        for (j, &b) in bins.iter().enumerate() {
            x[b] = ((mask >> j) & 1) as f64;
        }
        if bins.iter().any(|&b| x[b] < m.vars[b].lower || x[b] > m.vars[b].upper) {
            continue;
        }
        if let Some(v) = best_basic(m, &x, &cont) {
            if best.map_or(true, |b| v < b) {
                best = Some(v);
            }
        }
    }
    best
}
