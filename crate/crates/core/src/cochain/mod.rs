//! Group-cohomological operators on Fourier cochains.
//!
//! A 1-cochain assigns a field to every letter of the alphabet; relator
//! indexed tuples play the role of 2-cochains. Because rotations have trivial
//! differential, every operator acts on mode `k` as a small complex matrix
//! (tensored with `Id_d`), which is what [`BoxOperator`] assembles and caches.

mod blocks;
mod ops;
mod solve;
mod spectrum;

pub use blocks::{BoxBlock, BoxOperator};
pub use solve::{HarmonicSplit, SolveOutcome};
pub use solve::canonical_mode;
pub use spectrum::{diophantine_from_rows, scan_modes, shells, DiophantineFit, DolgopyatFit, ShellRow, SpectrumRow};

use num_complex::Complex64;

use crate::error::{KamError, Result};
use crate::field::FourierField;

/// Which letters index a 1-cochain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// One component per letter of `S` (generators and inverses, `2ν`).
    #[default]
    AllLetters,
    /// One component per generator; inverse letters are tied to generators by
    /// `v_{i+ν} = -π(γ_i⁻¹)_* v_i`.
    InverseConvention,
}

/// A tuple of fields sharing the dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    components: Vec<FourierField>,
}

impl Cochain {
    pub fn new(components: Vec<FourierField>) -> Result<Self> {
        if let Some(first) = components.first() {
            for c in &components {
                if c.dim() != first.dim() {
                    return Err(KamError::DimensionMismatch {
                        expected: first.dim(),
                        found: c.dim(),
                    });
                }
            }
        }
        Ok(Self { components })
    }

    pub fn zero(len: usize, dim: usize) -> Self {
        Self {
            components: vec![FourierField::zero(dim); len],
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[FourierField] {
        &self.components
    }

    pub fn into_components(self) -> Vec<FourierField> {
        self.components
    }

    pub fn get(&self, i: usize) -> &FourierField {
        &self.components[i]
    }

    pub fn dim(&self) -> Option<usize> {
        self.components.first().map(|c| c.dim())
    }

    /// Largest box half-width among the components.
    pub fn half_width(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.half_width())
            .max()
            .unwrap_or(0)
    }

    /// Combined norm `(Σ_l ‖U_l‖_r²)^{1/2}`.
    pub fn norm(&self, r: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weighted_norm(r).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_majorant(&self, r: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.sup_majorant(r))
            .fold(0.0, f64::max)
    }

    pub fn deriv_majorant(&self, r: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.deriv_majorant(r))
            .fold(0.0, f64::max)
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&FourierField, &FourierField) -> Result<FourierField>,
    ) -> Result<Self> {
        if self.len() != other.len() {
            return Err(KamError::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scale(s)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&FourierField) -> FourierField) -> Self {
        Self {
            components: self.components.iter().map(f).collect(),
        }
    }

    /// `L²` pairing `Σ_l ⟨U_l, V_l⟩`.
    pub fn l2_inner(&self, other: &Self) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(KamError::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let mut s = Complex64::new(0.0, 0.0);
        for (a, b) in self.components.iter().zip(&other.components) {
            s += a.l2_inner(b)?;
        }
        Ok(s)
    }

    pub fn truncate(&self, n: f64) -> Self {
        self.map(|c| c.truncate(n))
    }

    pub fn truncate_tail(&self, n: f64) -> Self {
        self.map(|c| c.truncate_tail(n))
    }

    /// All components resized to a common box.
    pub(crate) fn aligned(&self, half_width: usize) -> Vec<FourierField> {
        self.components
            .iter()
            .map(|c| c.resized(half_width))
            .collect()
    }
}
