use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct CoordConfig {
    /// Serious-step threshold on eta, in (0, 1).
    pub gamma: f64,
    /// Gauss-Seidel passes per outer iteration.
    pub t_max: usize,
    pub k_max: usize,
    /// Convergence threshold on the summed gaps; `None` means
    /// `1e-4 * (1 + |initial primal value|)`.
    pub eps_tol: Option<f64>,
    pub rho0: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Restart threshold of the momentum residual.
    pub delta: f64,
    pub accelerate: bool,
    pub workers: usize,
    /// Recorded in artifacts; the iteration itself draws no random numbers.
    pub seed: u64,
}

impl Default for CoordConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            t_max: 3,
            k_max: 100,
            eps_tol: None,
            rho0: 1.0,
            rho_min: 1e-3,
            rho_max: 1e6,
            delta: 0.99,
            accelerate: true,
            workers: 1,
            seed: 0,
        }
    }
}

impl CoordConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.t_max == 0 || self.k_max == 0 {
            return Err("tMax and kMax must be positive".into());
        }
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho0 && self.rho0 <= self.rho_max) {
            return Err(format!(
                "need 0 < rhoMin <= rho0 <= rhoMax, got {} / {} / {}",
                self.rho_min, self.rho0, self.rho_max
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        if let Some(e) = self.eps_tol {
            if !(e >= 0.0) {
                return Err(format!("epsTol must be non-negative, got {}", e));
            }
        }
        Ok(())
    }
}
