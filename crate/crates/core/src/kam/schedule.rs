use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};

/// One row of the iteration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub m: usize,
    pub r: f64,
    pub r_next: f64,
    pub r_tilde: f64,
    pub r_prime: f64,
    pub eps: f64,
    pub n_trunc: f64,
    pub zeta: f64,
}

/// The smallness condition `|ln ε₀| < ε₀^{-1/(60(τ+6n))}`, reported only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessGate {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eps0: f64,
    pub r0: f64,
    pub zeta0: f64,
    pub rows: Vec<ScheduleRow>,
}

/// `r_m = r₀(1/2 + 2^{-(m+1)})`, the closed form of `r_{m+1} = r_m - r₀/2^{m+2}`.
pub fn radius(r0: f64, m: usize) -> f64 {
    r0 * (0.5 + 0.5f64.powi(m as i32 + 1))
}

impl Schedule {
    /// Rows `0..=max_steps`.
    pub fn new(eps0: f64, r0: f64, zeta0: f64, max_steps: usize) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < 1.0) {
            return Err(KamError::InvalidParameter(format!("eps0 must lie in (0, 1), got {eps0}")));
        }
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(KamError::InvalidParameter(format!("r0 must be positive, got {r0}")));
        }
        let zmax = eps0.ln().abs().powf(-1.0 / 3.0);
        if !(zeta0 >= 0.0 && zeta0 < zmax) {
            return Err(KamError::InvalidParameter(format!(
                "zeta0 must lie in [0, {zmax:.6}), got {zeta0}"
            )));
        }
        let mut rows = Vec::with_capacity(max_steps + 1);
        let (mut r, mut eps, mut zeta) = (r0, eps0, zeta0);
        for m in 0..=max_steps {
            let r_next = r - r0 / 2f64.powi(m as i32 + 2);
            rows.push(ScheduleRow {
                m,
                r,
                r_next,
                r_tilde: (r + r_next) / 2.0,
                r_prime: (3.0 * r + r_next) / 4.0,
                eps,
                n_trunc: 6.0 * eps.ln().abs() / (r - r_next),
                zeta,
            });
            zeta += 2.0 * eps.powf(0.75);
            eps = eps.powf(1.2);
            r = r_next;
        }
        Ok(Self {
            eps0,
            r0,
            zeta0,
            rows,
        })
    }

    pub fn row(&self, m: usize) -> Option<&ScheduleRow> {
        self.rows.get(m)
    }

    pub fn max_steps(&self) -> usize {
        self.rows.len() - 1
    }

    /// Limit radius `r₀/2`.
    pub fn r_limit(&self) -> f64 {
        self.r0 / 2.0
    }

    pub fn smallness_gate(&self, tau: f64, dim: usize) -> SmallnessGate {
        let lhs = self.eps0.ln().abs();
        let rhs = self.eps0.powf(-1.0 / (60.0 * (tau + 6.0 * dim as f64)));
        SmallnessGate {
            lhs,
            rhs,
            satisfied: lhs < rhs,
        }
    }
}
