use std::sync::Arc;

use dashmap::DashMap;
use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{Cochain, Convention};
use crate::error::{KamError, Result};
use crate::field::{phase, FourierField, ModeBox};
use crate::par;
use crate::presentation::{Letter, Presentation, RotationAction, RotationVector};

/// Relative cutoff below which an eigenvalue of a box block counts as zero.
pub const ZERO_EIGEN_REL: f64 = 1e-12;

/// The box operator restricted to a single Fourier mode.
#[derive(Debug, Clone)]
pub struct BoxBlock {
    pub mode: Vec<i64>,
    /// `B(k) = D0 D0^* + D1^* D1` as a Hermitian matrix on the cochain letters.
    pub matrix: DMatrix<Complex64>,
    /// Eigenvalues, ascending, negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<Complex64>,
    /// Smallest nonzero eigenvalue, `0` when the block has none.
    pub mu_min: f64,
    pub kernel_dim: usize,
    pub zero_threshold: f64,
    /// `Σ_l |1 - e^{-2πi⟨k,α_l⟩}|²`, zero when every letter fixes the mode.
    pub d0_norm_sq: f64,
    /// Most negative raw eigenvalue before clamping.
    pub min_raw_eigenvalue: f64,
}

impl BoxBlock {
    pub fn is_zero_mode(&self) -> bool {
        self.mode.iter().all(|&x| x == 0)
    }

    /// Orthonormal kernel basis as columns.
    pub fn kernel_basis(&self) -> DMatrix<Complex64> {
        self.eigenvectors.columns(0, self.kernel_dim).into_owned()
    }

    /// Largest eigenvalue (spectral norm).
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// A nonzero mode every letter fixes, or whose smallest nonzero
    /// eigenvalue falls below `floor`.
    pub fn is_resonant(&self, floor: f64) -> bool {
        !self.is_zero_mode() && (self.d0_norm_sq <= 1e-24 || self.mu_min < floor)
    }
}

/// Per-mode assembly of `d0`, `d1` and the box operator for a fixed
/// presentation and action, with a concurrent block cache.
#[derive(Debug)]
pub struct BoxOperator {
    presentation: Presentation,
    action: RotationAction,
    convention: Convention,
    prefix_rotations: Vec<Vec<RotationVector>>,
    cache: DashMap<Vec<i64>, Arc<BoxBlock>>,
    resonance_floor: f64,
}

impl BoxOperator {
    pub fn new(presentation: &Presentation, action: &RotationAction, convention: Convention) -> Result<Self> {
        if action.num_letters() != presentation.num_letters() {
            return Err(KamError::DimensionMismatch {
                expected: presentation.num_letters(),
                found: action.num_letters(),
            });
        }
        let prefix_rotations = presentation
            .relators()
            .iter()
            .map(|w| action.prefix_rotations(w))
            .collect();
        Ok(Self {
            presentation: presentation.clone(),
            action: action.clone(),
            convention,
            prefix_rotations,
            cache: DashMap::new(),
            resonance_floor: 1e-300,
        })
    }

    pub fn with_resonance_floor(mut self, floor: f64) -> Self {
        self.resonance_floor = floor;
        self
    }

    pub fn resonance_floor(&self) -> f64 {
        self.resonance_floor
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn action(&self) -> &RotationAction {
        &self.action
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn dim(&self) -> usize {
        self.action.dim()
    }

    /// Number of cochain components under the active convention.
    pub fn cochain_len(&self) -> usize {
        match self.convention {
            Convention::AllLetters => self.presentation.num_letters(),
            Convention::InverseConvention => self.presentation.num_generators(),
        }
    }

    /// Letters indexing the cochain components.
    pub fn cochain_letters(&self) -> Vec<Letter> {
        (0..self.cochain_len()).map(Letter).collect()
    }

    pub(crate) fn prefix_rotation(&self, relator: usize, len: usize) -> &RotationVector {
        &self.prefix_rotations[relator][len]
    }

    /// Mode-`k` multiplier of `d0`: `1 - e^{-2πi⟨k,α_l⟩}` per cochain letter.
    pub fn d0_vector(&self, k: &[i64]) -> Vec<Complex64> {
        self.cochain_letters()
            .into_iter()
            .map(|l| Complex64::new(1.0, 0.0) - phase(self.action.alpha(l).turns(k)))
            .collect()
    }

    /// Mode-`k` matrix of `d1` on all `2ν` letters (relators × letters).
    pub fn d1_matrix_all_letters(&self, k: &[i64]) -> DMatrix<Complex64> {
        let p = &self.presentation;
        let mut m = DMatrix::zeros(p.num_relators(), p.num_letters());
        for j in 0..p.num_relators() {
            for l in p.letters() {
                let mut s = Complex64::new(0.0, 0.0);
                for &q in p.subwords(j, l) {
                    s += phase(self.prefix_rotations[j][q].turns(k));
                }
                m[(j, l.0)] = s;
            }
        }
        m
    }

    /// Mode-`k` extension map from generator components to all letters,
    /// `v_{i+ν} = -π(γ_i⁻¹)_* v_i`.
    pub fn extension_matrix(&self, k: &[i64]) -> DMatrix<Complex64> {
        let p = &self.presentation;
        let nu = p.num_generators();
        let mut e = DMatrix::zeros(2 * nu, nu);
        for i in 0..nu {
            e[(i, i)] = Complex64::new(1.0, 0.0);
            let inv = p.inverse(Letter(i));
            e[(i + nu, i)] = -phase(self.action.alpha(inv).turns(k));
        }
        e
    }

    /// Mode-`k` matrix of `d1` under the active convention.
    pub fn d1_matrix(&self, k: &[i64]) -> DMatrix<Complex64> {
        let full = self.d1_matrix_all_letters(k);
        match self.convention {
            Convention::AllLetters => full,
            Convention::InverseConvention => full * self.extension_matrix(k),
        }
    }

    /// Assemble and diagonalise `B(k)` without touching the cache.
    pub fn compute_block(&self, k: &[i64]) -> BoxBlock {
        let n = self.cochain_len();
        let a = DMatrix::from_column_slice(n, 1, &self.d0_vector(k));
        let d1 = self.d1_matrix(k);
        let matrix = &a * a.adjoint() + d1.adjoint() * &d1;
        let d0_norm_sq = a.iter().map(|z| z.norm_sqr()).sum();
        diagonalise(k.to_vec(), matrix, d0_norm_sq)
    }

    /// Cached block at mode `k`.
    pub fn block(&self, k: &[i64]) -> Arc<BoxBlock> {
        if let Some(b) = self.cache.get(k) {
            return b.clone();
        }
        let b = Arc::new(self.compute_block(k));
        if b.mu_min > 0.0 && b.mu_min < 10.0 * b.zero_threshold {
            warn!(
                "near-resonance at mode {:?}: mu_min = {:e}, threshold = {:e}",
                k, b.mu_min, b.zero_threshold
            );
        }
        self.cache.entry(k.to_vec()).or_insert(b).clone()
    }

    pub fn cached_blocks(&self) -> usize {
        self.cache.len()
    }

    /// Apply a per-mode linear map to a tuple of fields. `f` receives the
    /// mode, its block (when `need_block`) and the `n_in × d` coefficient
    /// matrix, and returns an `n_out × d` matrix.
    pub(crate) fn map_modes<F>(
        &self,
        input: &[FourierField],
        n_out: usize,
        half_width: usize,
        f: F,
    ) -> Vec<FourierField>
    where
        F: Fn(&[i64], &DMatrix<Complex64>) -> DMatrix<Complex64> + Sync + Send,
    {
        let d = self.dim();
        let mb = ModeBox::new(d, half_width);
        let aligned: Vec<FourierField> = input.iter().map(|c| c.resized(half_width)).collect();
        let n_in = aligned.len();
        let per_mode: Vec<DMatrix<Complex64>> = par::map_range(mb.len(), |i| {
            let k = mb.mode(i);
            let x = DMatrix::from_fn(n_in, d, |l, a| aligned[l].coeff_at(i)[a]);
            f(&k, &x)
        });
        (0..n_out)
            .map(|o| {
                let mut coeffs = Vec::with_capacity(mb.len() * d);
                for y in &per_mode {
                    for a in 0..d {
                        coeffs.push(y[(o, a)]);
                    }
                }
                FourierField::assemble(d, half_width, coeffs)
            })
            .collect()
    }

    /// `□U` assembled from the per-mode blocks.
    pub fn box_apply_blocks(&self, u: &Cochain) -> Result<Cochain> {
        self.check_cochain(u)?;
        let k = u.half_width();
        let out = self.map_modes(u.components(), self.cochain_len(), k, |m, x| {
            &self.block(m).matrix * x
        });
        Cochain::new(out)
    }

    pub(crate) fn check_cochain(&self, u: &Cochain) -> Result<()> {
        if u.len() != self.cochain_len() {
            return Err(KamError::DimensionMismatch {
                expected: self.cochain_len(),
                found: u.len(),
            });
        }
        if let Some(d) = u.dim() {
            if d != self.dim() {
                return Err(KamError::DimensionMismatch {
                    expected: self.dim(),
                    found: d,
                });
            }
        }
        Ok(())
    }
}

fn diagonalise(mode: Vec<i64>, matrix: DMatrix<Complex64>, d0_norm_sq: f64) -> BoxBlock {
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let raw: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let min_raw_eigenvalue = raw.first().copied().unwrap_or(0.0);
    let norm = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let zero_threshold = ZERO_EIGEN_REL * norm.max(1.0);
    let eigenvalues: Vec<f64> = raw.iter().map(|&x| x.max(0.0)).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        eigenvectors.set_column(c, &eig.eigenvectors.column(i));
    }
    let kernel_dim = eigenvalues.iter().filter(|&&x| x < zero_threshold).count();
    let mu_min = eigenvalues
        .iter()
        .copied()
        .find(|&x| x >= zero_threshold)
        .unwrap_or(0.0);
    BoxBlock {
        mode,
        matrix,
        eigenvalues,
        eigenvectors,
        mu_min,
        kernel_dim,
        zero_threshold,
        d0_norm_sq,
        min_raw_eigenvalue,
    }
}
