//! Mode scans of the box operator: spectrum tables, Diophantine and
//! Dolgopyat constants.

use serde::{Deserialize, Serialize};

use super::solve::canonical_mode;
use super::BoxOperator;
use crate::error::{KamError, Result};
use crate::field::{lambda, phase, ModeBox};
use crate::par;
use crate::presentation::Letter;

/// One scanned mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub k: Vec<i64>,
    pub lambda: f64,
    pub mu_min: f64,
    pub kernel_dim: usize,
    /// Every letter fixes the mode.
    pub resonant: bool,
}

/// Modes grouped by `|k|²`, i.e. by eigenvalue of the Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellRow {
    pub norm_sq: i64,
    pub lambda: f64,
    pub modes: usize,
    /// Minimum of the per-mode `mu_min` over the shell, zero if any mode in
    /// the shell is resonant.
    pub mu_min: f64,
    pub kernel_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineFit {
    pub tau: f64,
    pub k_max: f64,
    pub sigma: f64,
    pub argmin: Vec<i64>,
    pub modes_scanned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DolgopyatFit {
    pub tau: f64,
    pub k_max: f64,
    pub c: f64,
    pub argmin: Vec<i64>,
    pub modes_scanned: usize,
}

/// Canonical representatives of `0 < |k|₂ ≤ k_max`, ordered by `|k|²` and
/// then lexicographically.
pub fn scan_modes(dim: usize, k_max: f64) -> Vec<Vec<i64>> {
    let hw = k_max.floor().max(0.0) as usize;
    let mb = ModeBox::new(dim, hw);
    let lim = k_max * k_max * (1.0 + 1e-12);
    let mut out: Vec<Vec<i64>> = (0..mb.len())
        .map(|i| mb.mode(i))
        .filter(|k| {
            let n: i64 = k.iter().map(|x| x * x).sum();
            n > 0 && (n as f64) <= lim && canonical_mode(k) == *k
        })
        .collect();
    out.sort_by_key(|k| (k.iter().map(|x| x * x).sum::<i64>(), k.clone()));
    out
}

fn check_scan(tau: f64, k_max: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(KamError::InvalidParameter(format!("tau must be nonnegative, got {tau}")));
    }
    if !(k_max >= 1.0) || !k_max.is_finite() {
        return Err(KamError::InvalidParameter(format!("K_max must be at least 1, got {k_max}")));
    }
    Ok(())
}

impl BoxOperator {
    /// Blocks of every canonical mode with `0 < |k|₂ ≤ k_max`, bypassing the
    /// cache.
    pub fn spectrum(&self, k_max: f64) -> Vec<SpectrumRow> {
        let modes = scan_modes(self.dim(), k_max);
        let floor = self.resonance_floor();
        par::map_slice(&modes, |k| {
            let b = self.compute_block(k);
            SpectrumRow {
                k: k.clone(),
                lambda: lambda(k),
                mu_min: b.mu_min,
                kernel_dim: b.kernel_dim,
                resonant: b.is_resonant(floor),
            }
        })
    }

    /// `σ = min mu_min(k)(1+λ_k)^τ` over the scan. Blocks with no nonzero
    /// eigenvalue are skipped unless the mode is resonant, which pins `σ = 0`;
    /// a scan where every block vanishes is an error.
    pub fn diophantine_fit(&self, tau: f64, k_max: f64) -> Result<DiophantineFit> {
        check_scan(tau, k_max)?;
        diophantine_from_rows(&self.spectrum(k_max), tau, k_max)
    }

    /// `C = inf_k max_i |1 - e^{-2πi⟨k,α_i⟩}| λ_k^τ` over the generators.
    pub fn dolgopyat_check(&self, tau: f64, k_max: f64) -> Result<DolgopyatFit> {
        check_scan(tau, k_max)?;
        let modes = scan_modes(self.dim(), k_max);
        let nu = self.presentation().num_generators();
        let vals = par::map_slice(&modes, |k| {
            let m = (0..nu)
                .map(|i| {
                    let t = self.action().alpha(Letter(i)).turns(k);
                    (num_complex::Complex64::new(1.0, 0.0) - phase(t)).norm()
                })
                .fold(0.0, f64::max);
            m * lambda(k).powf(tau)
        });
        let mut best = (f64::INFINITY, Vec::new());
        for (k, v) in modes.iter().zip(&vals) {
            if *v < best.0 {
                best = (*v, k.clone());
            }
        }
        Ok(DolgopyatFit {
            tau,
            k_max,
            c: if modes.is_empty() { 0.0 } else { best.0 },
            argmin: best.1,
            modes_scanned: modes.len(),
        })
    }
}

pub fn diophantine_from_rows(rows: &[SpectrumRow], tau: f64, k_max: f64) -> Result<DiophantineFit> {
    if rows.iter().all(|r| r.mu_min == 0.0) {
        return Err(KamError::TrivialAction);
    }
    let mut best: Option<(f64, Vec<i64>)> = None;
    for r in rows {
        let v = if r.resonant {
            0.0
        } else if r.mu_min > 0.0 {
            r.mu_min * (1.0 + r.lambda).powf(tau)
        } else {
            continue;
        };
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, r.k.clone()));
        }
    }
    let (sigma, argmin) = best.ok_or(KamError::TrivialAction)?;
    Ok(DiophantineFit {
        tau,
        k_max,
        sigma,
        argmin,
        modes_scanned: rows.len(),
    })
}

/// Merge rows with equal `|k|²`.
pub fn shells(rows: &[SpectrumRow]) -> Vec<ShellRow> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let n: i64 = rows[i].k.iter().map(|x| x * x).sum();
        let mut j = i;
        while j < rows.len() && rows[j].k.iter().map(|x| x * x).sum::<i64>() == n {
            j += 1;
        }
        let group = &rows[i..j];
        let mu_min = if group.iter().any(|r| r.resonant) {
            0.0
        } else {
            let m = group
                .iter()
                .filter(|r| r.mu_min > 0.0)
                .map(|r| r.mu_min)
                .fold(f64::INFINITY, f64::min);
            if m.is_finite() {
                m
            } else {
                0.0
            }
        };
        out.push(ShellRow {
            norm_sq: n,
            lambda: rows[i].lambda,
            modes: group.len(),
            mu_min,
            kernel_dim: group.iter().map(|r| r.kernel_dim).sum(),
        });
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::Convention;
    use crate::presentation::{Presentation, RotationAction, RotationVector};
    use num_rational::Rational64;

    fn circle(alpha: RotationVector, conv: Convention) -> BoxOperator {
        let p = Presentation::new(1, &[]).unwrap();
        let a = RotationAction::from_generators(&p, vec![alpha]).unwrap();
        BoxOperator::new(&p, &a, conv).unwrap()
    }

    #[test]
    fn scan_counts() {
        assert_eq!(scan_modes(1, 100.0).len(), 100);
        // 12 nonzero points with |k|² ≤ 4, one per ± pair.
        let m = scan_modes(2, 2.0);
        assert_eq!(m.len(), 6);
        assert_eq!(m[0], vec![0, 1]);
    }

    #[test]
    fn rational_third_pins_sigma_at_three() {
        let op = circle(
            RotationVector::from_rational(vec![Rational64::new(1, 3)]),
            Convention::AllLetters,
        );
        for tau in [0.0, 1.0, 3.0] {
            let fit = op.diophantine_fit(tau, 10.0).unwrap();
            assert_eq!(fit.sigma, 0.0);
            assert_eq!(fit.argmin, vec![3]);
        }
    }

    #[test]
    fn half_turn_kernels_at_even_modes() {
        let op = circle(
            RotationVector::from_rational(vec![Rational64::new(1, 2)]),
            Convention::InverseConvention,
        );
        let rows = op.spectrum(4.0);
        let ker: Vec<usize> = rows.iter().map(|r| r.kernel_dim).collect();
        assert_eq!(ker, vec![0, 1, 0, 1]);
    }

    #[test]
    fn zero_rotation() {
        let op = circle(RotationVector::zeros(1), Convention::AllLetters);
        assert!(matches!(op.diophantine_fit(1.0, 5.0), Err(KamError::TrivialAction)));
        let d = op.dolgopyat_check(1.0, 5.0).unwrap();
        assert_eq!(d.c, 0.0);
        let p = Presentation::new(1, &[]).unwrap();
        let a = RotationAction::from_f64(&p, vec![vec![0.5]]).unwrap();
        let op = BoxOperator::new(&p, &a, Convention::AllLetters).unwrap();
        // Odd modes carry nonzero blocks; k = 2 resonates.
        assert_eq!(op.diophantine_fit(0.0, 3.0).unwrap().argmin, vec![2]);
    }

    #[test]
    fn golden_mean_constants_positive() {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let op = circle(RotationVector::from_f64(vec![g]), Convention::AllLetters);
        let lo = op.diophantine_fit(1.0, 200.0).unwrap();
        let hi = op.diophantine_fit(2.0, 200.0).unwrap();
        assert!(lo.sigma > 0.0 && hi.sigma >= lo.sigma);
        assert!(op.dolgopyat_check(1.0, 200.0).unwrap().c > 0.0);
    }

    #[test]
    fn shells_merge_equal_norms() {
        let p = Presentation::free_abelian(2).unwrap();
        let a = RotationAction::from_f64(&p, vec![vec![0.3, 0.11], vec![0.2, 0.77]]).unwrap();
        let op = BoxOperator::new(&p, &a, Convention::InverseConvention).unwrap();
        let rows = op.spectrum(3.0);
        let sh = shells(&rows);
        let total: usize = sh.iter().map(|s| s.modes).sum();
        assert_eq!(total, rows.len());
        for s in &sh {
            let min = rows
                .iter()
                .filter(|r| r.k.iter().map(|x| x * x).sum::<i64>() == s.norm_sq)
                .map(|r| r.mu_min)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(s.mu_min, min);
        }
    }
}
