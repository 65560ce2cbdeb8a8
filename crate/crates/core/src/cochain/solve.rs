use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{BoxOperator, Cochain};
use crate::error::{KamError, Result};
use crate::field::{lambda, ModeBox};

/// `U = ℋU + ℋ^⊥U`.
#[derive(Debug, Clone)]
pub struct HarmonicSplit {
    pub harmonic: Cochain,
    pub complement: Cochain,
}

/// Result of the truncated cohomological solve `F = □⁻¹ Π_N ℋ^⊥ U`.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Cochain,
    /// `max 1/μ_min` over the solved modes: the operator norm of `□⁻¹Π_N`
    /// restricted to the input's support box.
    pub inverse_gain: f64,
    pub modes_solved: usize,
    /// `‖□F - Π_N ℋ^⊥ U‖_{L²}`.
    pub residual: f64,
}

/// Representative of `±k` whose first nonzero coordinate is positive.
pub fn canonical_mode(k: &[i64]) -> Vec<i64> {
    match k.iter().find(|&&x| x != 0) {
        Some(&x) if x < 0 => k.iter().map(|v| -v).collect(),
        _ => k.to_vec(),
    }
}

impl BoxOperator {
    /// Orthogonal projection onto `Ker □` and its complement, mode by mode.
    pub fn harmonic_project(&self, u: &Cochain) -> Result<HarmonicSplit> {
        self.check_cochain(u)?;
        let n = self.cochain_len();
        let hw = u.half_width();
        let harmonic = self.map_modes(u.components(), n, hw, |k, x| {
            let b = self.block(k);
            if b.kernel_dim == 0 {
                return DMatrix::zeros(x.nrows(), x.ncols());
            }
            let basis = b.kernel_basis();
            &basis * (basis.adjoint() * x)
        });
        let harmonic = Cochain::new(harmonic)?;
        let complement = Cochain::new(u.aligned(hw))?.sub(&harmonic)?;
        Ok(HarmonicSplit {
            harmonic,
            complement,
        })
    }

    /// Resonant modes among `0 < λ_k ≤ N` inside the box of half-width `hw`,
    /// canonical representatives sorted by `|k|₂`.
    pub fn resonant_modes(&self, hw: usize, n: f64) -> Vec<Vec<i64>> {
        let mb = ModeBox::new(self.dim(), hw);
        let mut out: Vec<Vec<i64>> = (0..mb.len())
            .map(|i| mb.mode(i))
            .filter(|k| k.iter().any(|&x| x != 0) && lambda(k) <= n * (1.0 + 1e-12))
            .filter(|k| canonical_mode(k) == *k)
            .filter(|k| self.block(k).is_resonant(self.resonance_floor()))
            .collect();
        out.sort_by(|a, b| {
            let na: i64 = a.iter().map(|x| x * x).sum();
            let nb: i64 = b.iter().map(|x| x * x).sum();
            na.cmp(&nb).then_with(|| a.cmp(b))
        });
        out
    }

    /// Solve `□F = Π_N ℋ^⊥ U` with `ℋF = 0`.
    pub fn solve_cohomological(&self, u: &Cochain, n: f64) -> Result<SolveOutcome> {
        self.check_cochain(u)?;
        let hw = u.half_width();
        if let Some(k) = self.resonant_modes(hw, n).into_iter().next() {
            let mu_min = self.block(&k).mu_min;
            return Err(KamError::Resonance { mode: k, mu_min });
        }
        let len = self.cochain_len();
        let cut = n * (1.0 + 1e-12);
        let solution = self.map_modes(u.components(), len, hw, |k, x| {
            if lambda(k) > cut {
                return DMatrix::zeros(x.nrows(), x.ncols());
            }
            let b = self.block(k);
            let mut acc = DMatrix::<Complex64>::zeros(x.nrows(), x.ncols());
            for (j, &mu) in b.eigenvalues.iter().enumerate() {
                if mu < b.zero_threshold {
                    continue;
                }
                let e = b.eigenvectors.column(j);
                let proj = e.adjoint() * x;
                acc += (e * proj) * Complex64::new(1.0 / mu, 0.0);
            }
            acc
        });
        let solution = Cochain::new(solution)?;

        let mb = ModeBox::new(self.dim(), hw);
        let mut gain = 0.0f64;
        let mut solved = 0usize;
        for i in 0..mb.len() {
            let k = mb.mode(i);
            if lambda(&k) > cut {
                continue;
            }
            let b = self.block(&k);
            if b.mu_min > 0.0 {
                gain = gain.max(1.0 / b.mu_min);
                solved += 1;
            }
        }

        let boxed = self.box_apply_blocks(&solution)?;
        let target = self.harmonic_project(u)?.complement.truncate(n);
        let residual = boxed.sub(&target)?.norm(0.0);
        Ok(SolveOutcome {
            solution,
            inverse_gain: gain,
            modes_solved: solved,
            residual,
        })
    }

    /// `max_{0 < λ_k ≤ N} 1/μ_min(k)` over the whole lattice ball, i.e. the
    /// operator norm of `□⁻¹∘Π_N` on any weighted space.
    pub fn truncated_inverse_norm(&self, n: f64) -> f64 {
        let kmax = (n / (2.0 * std::f64::consts::PI)).floor() as usize;
        let mb = ModeBox::new(self.dim(), kmax);
        let modes: Vec<Vec<i64>> = (0..mb.len())
            .map(|i| mb.mode(i))
            .filter(|k| k.iter().any(|&x| x != 0) && canonical_mode(k) == *k)
            .filter(|k| lambda(k) <= n * (1.0 + 1e-12))
            .collect();
        let gains = crate::par::map_slice(&modes, |k| {
            let b = self.compute_block(k);
            if b.mu_min > 0.0 {
                1.0 / b.mu_min
            } else {
                0.0
            }
        });
        gains.into_iter().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::Convention;
    use crate::field::FourierField;
    use crate::presentation::{Presentation, RotationAction};

    fn circle() -> BoxOperator {
        let p = Presentation::new(1, &[]).unwrap();
        let a = RotationAction::from_f64(&p, vec![vec![(5f64.sqrt() - 1.0) / 2.0]]).unwrap();
        BoxOperator::new(&p, &a, Convention::AllLetters).unwrap()
    }

    #[test]
    fn zero_input_solves_to_zero() {
        let op = circle();
        let out = op.solve_cohomological(&Cochain::zero(2, 1), 100.0).unwrap();
        assert_eq!(out.solution.norm(0.0), 0.0);
    }

    #[test]
    fn single_mode_divides_by_block_eigenvalue() {
        let op = circle();
        let v = FourierField::from_trig_terms(1, &[(vec![1], 0, 1e-3, 0.0)]).unwrap();
        // d0 v lies in the range of the rank-one block at k = ±1.
        let u = op.d0(&v).unwrap();
        let out = op.solve_cohomological(&u, 100.0).unwrap();
        let mu = op.block(&[1]).mu_min;
        assert!((mu - 8.0 * (std::f64::consts::PI * (5f64.sqrt() - 1.0) / 2.0).sin().powi(2)).abs() < 1e-12);
        let want = u.scale(1.0 / mu);
        assert!(out.solution.sub(&want).unwrap().norm(0.0) < 1e-15 * u.norm(0.0).max(1.0));
    }

    #[test]
    fn harmonic_parts_sum_back() {
        let op = circle();
        let u = Cochain::new(vec![
            FourierField::from_trig_terms(1, &[(vec![2], 0, 0.3, 0.1), (vec![0], 0, 0.2, 0.0)]).unwrap(),
            FourierField::from_trig_terms(1, &[(vec![1], 0, -0.4, 0.2)]).unwrap(),
        ])
        .unwrap();
        let split = op.harmonic_project(&u).unwrap();
        let back = split.harmonic.add(&split.complement).unwrap();
        assert!(back.sub(&u).unwrap().norm(0.0) < 1e-15);
        assert!(split.harmonic.norm(0.2) <= u.norm(0.2) + 1e-15);
        assert!(split.complement.norm(0.2) <= u.norm(0.2) + 1e-15);
        let again = op.harmonic_project(&split.harmonic).unwrap();
        assert!(again.complement.norm(0.0) < 1e-15);
    }

    #[test]
    fn canonical_representatives() {
        assert_eq!(canonical_mode(&[-3]), vec![3]);
        assert_eq!(canonical_mode(&[0, -2]), vec![0, 2]);
        assert_eq!(canonical_mode(&[1, -2]), vec![1, -2]);
    }
}
