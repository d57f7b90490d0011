//! Multiplier, penalty and momentum bookkeeping of the outer loop.

use crate::config::CoordConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinationState {
    /// Stability-center multipliers per block.
    pub w: Vec<Vec<f64>>,
    /// Center before the last serious step.
    pub w_prev: Vec<Vec<f64>>,
    /// Multipliers fed to the next iteration's solves.
    pub w_hat: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub rho: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Dual lower bound per block; `-inf` until the first serious step.
    pub phi_lo: Vec<f64>,
    /// Dual values of the latest trial multipliers.
    pub phi_trial: Vec<f64>,
    pub eps: Vec<f64>,
    pub dphi: Vec<f64>,
    pub alpha: f64,
    /// Momentum residual of the previous serious step.
    pub c_prev: f64,
    pub k: usize,
    pub inner: usize,
}

impl CoordinationState {
    pub fn new(sizes: &[usize], cfg: &CoordConfig) -> Self {
        let zeros: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        let nb = sizes.len();
        Self {
            w: zeros.clone(),
            w_prev: zeros.clone(),
            w_hat: zeros.clone(),
            z: zeros,
            rho: cfg.rho0,
            rho_min: cfg.rho_min,
            rho_max: cfg.rho_max,
            phi_lo: vec![f64::NEG_INFINITY; nb],
            phi_trial: vec![f64::NEG_INFINITY; nb],
            eps: vec![f64::INFINITY; nb],
            dphi: vec![f64::INFINITY; nb],
            alpha: 1.0,
            c_prev: f64::INFINITY,
            k: 0,
            inner: 0,
        }
    }

    pub fn lower_bound(&self) -> f64 {
        self.phi_lo.iter().sum()
    }
}

/// Outcome of the serious-step test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// `None` on the first test, while a lower bound is still `-inf`.
    pub eta: Option<f64>,
    pub serious: bool,
    /// Summed gaps against the (possibly updated) lower bounds.
    pub sum_eps: f64,
    pub converged: bool,
}

pub const EPS_FLOOR: f64 = 1e-12;

/// Serious / null step. `phi_hat` are the model values at the hull points,
/// `phi_trial` the dual values at `w_trial`. A serious step needs
/// `eta >= gamma` and a non-negative summed dual progress; it moves the
/// center to `w_trial` and the lower bounds to `phi_trial`. Null steps leave
/// `w` and the lower bounds untouched.
pub fn serious_step_update(
    state: &mut CoordinationState,
    phi_hat: &[f64],
    phi_trial: &[f64],
    w_trial: &[Vec<f64>],
    gamma: f64,
    eps_tol: f64,
) -> StepOutcome {
    let nb = phi_hat.len();
    state.phi_trial = phi_trial.to_vec();
    let first = state.phi_lo.iter().any(|v| v.is_infinite());
    let (eta, serious) = if first {
        (None, true)
    } else {
        let eps: Vec<f64> = (0..nb).map(|b| phi_hat[b] - state.phi_lo[b]).collect();
        let dphi: Vec<f64> = (0..nb).map(|b| phi_trial[b] - state.phi_lo[b]).collect();
        let se: f64 = eps.iter().sum();
        let sd: f64 = dphi.iter().sum();
        let eta = sd / se.max(EPS_FLOOR);
        state.eps = eps;
        state.dphi = dphi;
        (Some(eta), eta >= gamma && sd >= 0.0)
    };
    if serious {
        state.w_prev = std::mem::replace(&mut state.w, w_trial.to_vec());
        state.phi_lo = phi_trial.to_vec();
    }
    state.eps = (0..nb).map(|b| phi_hat[b] - state.phi_lo[b]).collect();
    if first {
        state.dphi = vec![0.0; nb];
    }
    let sum_eps: f64 = state.eps.iter().sum();
    StepOutcome {
        eta,
        serious,
        sum_eps,
        converged: sum_eps <= eps_tol,
    }
}

/// `1/rho' = min{ max{ 2(1-eta)/rho, 1/(10 rho), 1/rho_max }, 10/rho, 1/rho_min }`.
pub fn update_penalty(rho: f64, eta: f64, rho_min: f64, rho_max: f64) -> f64 {
    let inner = (2.0 * (1.0 - eta) / rho).max(1.0 / (10.0 * rho)).max(1.0 / rho_max);
    let inv = inner.min(10.0 / rho).min(1.0 / rho_min);
    1.0 / inv
}

fn sq_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum()
}

/// Momentum update after a serious step produced `w` (with `w_prev` the
/// previous center and `w_hat` the multipliers used in that iteration).
/// Returns true on restart.
pub fn accelerate_multipliers(state: &mut CoordinationState, delta: f64) -> bool {
    let c = sq_dist(&state.w, &state.w_hat) / state.rho;
    if c < delta * state.c_prev {
        let a = state.alpha;
        let an = 0.5 * (1.0 + (1.0 + 4.0 * a * a).sqrt());
        let beta = (a - 1.0) / an;
        state.w_hat = state
            .w
            .iter()
            .zip(&state.w_prev)
            .map(|(wk, wp)| wk.iter().zip(wp).map(|(x, y)| x + beta * (x - y)).collect())
            .collect();
        state.alpha = an;
        state.c_prev = c;
        false
    } else {
        state.alpha = 1.0;
        state.w_hat = state.w_prev.clone();
        state.c_prev /= delta;
        true
    }
}
