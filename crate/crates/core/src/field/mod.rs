//! Real-analytic vector fields on `T^d` stored as finitely many Fourier
//! coefficients `c_k ∈ C^d` on a box `|k|_∞ ≤ K`, with `c_{-k} = conj(c_k)`.

mod grid;
mod io;

pub use grid::{compose_displacement, sample_on_grid, GridConfig, Sampled};
pub use io::{decay_rows, FieldRecord, ModeRecord};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::audit;
use crate::error::{KamError, Result};
use crate::par;
use crate::presentation::RotationVector;

/// Multi-index bookkeeping for the box `[-K, K]^d`, row-major with the first
/// axis slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeBox {
    pub dim: usize,
    pub half_width: usize,
}

impl ModeBox {
    pub fn new(dim: usize, half_width: usize) -> Self {
        Self { dim, half_width }
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice vector of the flat index `idx`.
    pub fn mode(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut k = vec![0i64; self.dim];
        for a in (0..self.dim).rev() {
            k[a] = (idx % side) as i64 - self.half_width as i64;
            idx /= side;
        }
        k
    }

    pub fn index(&self, k: &[i64]) -> Option<usize> {
        let kk = self.half_width as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &ka in k {
            if ka.abs() > kk {
                return None;
            }
            idx = idx * side + (ka + kk) as usize;
        }
        Some(idx)
    }

    /// Flat index of `-k` given the flat index of `k`.
    pub fn negate(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Index of the zero mode.
    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }
}

/// `λ_k = 2π|k|₂`, the square root of the flat Laplacian eigenvalue.
pub fn lambda(k: &[i64]) -> f64 {
    2.0 * PI * (k.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt()
}

fn l1(k: &[i64]) -> f64 {
    k.iter().map(|x| x.unsigned_abs() as f64).sum()
}

/// A real vector field on `T^d` in Fourier form.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    dim: usize,
    half_width: usize,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    /// Assemble from dense coefficients laid out `[mode][component]`.
    pub fn from_dense(dim: usize, half_width: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let mb = ModeBox::new(dim, half_width);
        if dim == 0 {
            return Err(KamError::InvalidParameter("dimension must be >= 1".into()));
        }
        if coeffs.len() != mb.len() * dim {
            return Err(KamError::DimensionMismatch {
                expected: mb.len() * dim,
                found: coeffs.len(),
            });
        }
        Ok(Self::assemble(dim, half_width, coeffs))
    }

    pub(crate) fn assemble(dim: usize, half_width: usize, coeffs: Vec<Complex64>) -> Self {
        let f = Self {
            dim,
            half_width,
            coeffs,
        };
        audit::record(&f);
        f
    }

    /// The zero field (empty support).
    pub fn zero(dim: usize) -> Self {
        Self::assemble(dim, 0, vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn zero_box(dim: usize, half_width: usize) -> Self {
        let n = ModeBox::new(dim, half_width).len() * dim;
        Self::assemble(dim, half_width, vec![Complex64::new(0.0, 0.0); n])
    }

    /// A constant (translation) field.
    pub fn constant(c: &[f64]) -> Self {
        Self::assemble(
            c.len(),
            0,
            c.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Build from a list of real trigonometric terms
    /// `(k, component, a, b)` meaning `a cos(2π⟨k,x⟩) + b sin(2π⟨k,x⟩)` in `component`.
    pub fn from_trig_terms(dim: usize, terms: &[(Vec<i64>, usize, f64, f64)]) -> Result<Self> {
        let half_width = terms
            .iter()
            .flat_map(|(k, _, _, _)| k.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        let mb = ModeBox::new(dim, half_width);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); mb.len() * dim];
        for (k, comp, a, b) in terms {
            if k.len() != dim {
                return Err(KamError::DimensionMismatch {
                    expected: dim,
                    found: k.len(),
                });
            }
            if *comp >= dim {
                return Err(KamError::InvalidParameter(format!(
                    "component {comp} out of range for dimension {dim}"
                )));
            }
            let idx = mb.index(k).unwrap();
            if k.iter().all(|&x| x == 0) {
                coeffs[idx * dim + comp] += Complex64::new(*a, 0.0);
            } else {
                let neg = mb.negate(idx);
                coeffs[idx * dim + comp] += Complex64::new(a / 2.0, -b / 2.0);
                coeffs[neg * dim + comp] += Complex64::new(a / 2.0, b / 2.0);
            }
        }
        Ok(Self::assemble(dim, half_width, coeffs))
    }

    /// Build from explicit `(k, c_k)` pairs; conjugate partners are filled in.
    /// Pairs given for both `k` and `-k` must already be conjugate.
    pub fn from_modes(dim: usize, modes: &[(Vec<i64>, Vec<Complex64>)]) -> Result<Self> {
        let half_width = modes
            .iter()
            .flat_map(|(k, _)| k.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        let mb = ModeBox::new(dim, half_width);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); mb.len() * dim];
        for (k, c) in modes {
            if k.len() != dim || c.len() != dim {
                return Err(KamError::DimensionMismatch {
                    expected: dim,
                    found: k.len().max(c.len()),
                });
            }
            let idx = mb.index(k).unwrap();
            let neg = mb.negate(idx);
            for a in 0..dim {
                coeffs[idx * dim + a] = c[a];
                coeffs[neg * dim + a] = c[a].conj();
            }
        }
        let f = Self::assemble(dim, half_width, coeffs);
        if f.reality_defect() > 1e-14 * f.sup_majorant(0.0).max(1e-300) {
            return Err(KamError::RealityViolation {
                imag: f.reality_defect(),
            });
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn mode_box(&self) -> ModeBox {
        ModeBox::new(self.dim, self.half_width)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient vector at mode `k` (zero outside the box).
    pub fn coeff(&self, k: &[i64]) -> Vec<Complex64> {
        match self.mode_box().index(k) {
            Some(i) => self.coeffs[i * self.dim..(i + 1) * self.dim].to_vec(),
            None => vec![Complex64::new(0.0, 0.0); self.dim],
        }
    }

    pub(crate) fn coeff_at(&self, idx: usize) -> &[Complex64] {
        &self.coeffs[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Modes carrying a nonzero coefficient.
    pub fn support(&self) -> Vec<Vec<i64>> {
        let mb = self.mode_box();
        (0..mb.len())
            .filter(|&i| self.coeff_at(i).iter().any(|c| c.norm_sqr() > 0.0))
            .map(|i| mb.mode(i))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Largest `|c_{-k} - conj(c_k)|` over the box.
    pub fn reality_defect(&self) -> f64 {
        let mb = self.mode_box();
        let mut worst = 0.0f64;
        for i in 0..mb.len() {
            let j = mb.negate(i);
            for a in 0..self.dim {
                let d = (self.coeffs[j * self.dim + a] - self.coeffs[i * self.dim + a].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Project onto the real subspace: `c_k ← (c_k + conj(c_{-k}))/2`.
    pub fn symmetrized(&self) -> Self {
        let mb = self.mode_box();
        let d = self.dim;
        let mut out = self.coeffs.clone();
        for i in 0..mb.len() {
            let j = mb.negate(i);
            for a in 0..d {
                out[i * d + a] = (self.coeffs[i * d + a] + self.coeffs[j * d + a].conj()) * 0.5;
            }
        }
        Self::assemble(d, self.half_width, out)
    }

    /// Copy into a box of half-width `k`, dropping modes outside it.
    pub fn resized(&self, k: usize) -> Self {
        if k == self.half_width {
            return self.clone();
        }
        let src = self.mode_box();
        let dst = ModeBox::new(self.dim, k);
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); dst.len() * d];
        for i in 0..dst.len() {
            let m = dst.mode(i);
            if let Some(j) = src.index(&m) {
                out[i * d..(i + 1) * d].copy_from_slice(&self.coeffs[j * d..(j + 1) * d]);
            }
        }
        Self::assemble(d, k, out)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(KamError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_dim(other)?;
        let k = self.half_width.max(other.half_width);
        let a = self.resized(k);
        let b = other.resized(k);
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| f(*x, *y))
            .collect();
        Ok(Self::assemble(self.dim, k, coeffs))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::assemble(
            self.dim,
            self.half_width,
            self.coeffs.iter().map(|c| c * s).collect(),
        )
    }

    /// Mean (mode-0) part as a real vector.
    pub fn mean(&self) -> Vec<f64> {
        let z = self.mode_box().zero_index();
        self.coeff_at(z).iter().map(|c| c.re).collect()
    }

    /// The field with its mode-0 component removed.
    pub fn without_mean(&self) -> Self {
        let z = self.mode_box().zero_index();
        let mut c = self.coeffs.clone();
        for a in 0..self.dim {
            c[z * self.dim + a] = Complex64::new(0.0, 0.0);
        }
        Self::assemble(self.dim, self.half_width, c)
    }

    fn per_mode<T: Send>(&self, f: impl Fn(&[i64], &[Complex64]) -> T + Sync + Send) -> Vec<T> {
        let mb = self.mode_box();
        par::map_range(mb.len(), |i| f(&mb.mode(i), self.coeff_at(i)))
    }

    /// Weighted `L²` norm `(Σ |c_k|² e^{2rλ_k} (1+λ_k)^{-(d-1)/2})^{1/2}`.
    pub fn weighted_norm(&self, r: f64) -> f64 {
        let expo = -((self.dim as f64) - 1.0) / 2.0;
        let terms = self.per_mode(|k, c| {
            let m2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            if m2 == 0.0 {
                return 0.0;
            }
            let lam = lambda(k);
            m2 * (2.0 * r * lam).exp() * (1.0 + lam).powf(expo)
        });
        terms.iter().sum::<f64>().sqrt()
    }

    /// `ℓ¹` exponential majorant `Σ |c_k| e^{rλ_k}` of the strip sup norm.
    pub fn sup_majorant(&self, r: f64) -> f64 {
        let terms = self.per_mode(|k, c| {
            let m = vec_norm(c);
            if m == 0.0 {
                0.0
            } else {
                m * (r * lambda(k)).exp()
            }
        });
        terms.iter().sum()
    }

    /// Majorant `Σ 2π|k|₁ |c_k| e^{rλ_k}` of the strip sup norm of the derivative.
    pub fn deriv_majorant(&self, r: f64) -> f64 {
        let terms = self.per_mode(|k, c| {
            let m = vec_norm(c);
            if m == 0.0 {
                0.0
            } else {
                2.0 * PI * l1(k) * m * (r * lambda(k)).exp()
            }
        });
        terms.iter().sum()
    }

    /// `L²` inner product `Σ_k ⟨c_k, c'_k⟩` (conjugate-linear in the second slot).
    pub fn l2_inner(&self, other: &Self) -> Result<Complex64> {
        self.check_dim(other)?;
        let k = self.half_width.max(other.half_width);
        let a = self.resized(k);
        let b = other.resized(k);
        Ok(a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| x * y.conj())
            .sum())
    }

    fn masked(&self, keep: impl Fn(f64) -> bool + Sync + Send) -> Self {
        let d = self.dim;
        let mb = self.mode_box();
        let mut out = self.coeffs.clone();
        par::for_each_chunk(&mut out, d, |i, chunk| {
            if !keep(lambda(&mb.mode(i))) {
                chunk.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            }
        });
        Self::assemble(d, self.half_width, out)
    }

    /// Keep the modes with `λ_k ≤ N`.
    pub fn truncate(&self, n: f64) -> Self {
        let cut = n * (1.0 + 1e-12);
        self.masked(move |lam| lam <= cut)
    }

    /// The complement of [`FourierField::truncate`]: modes with `λ_k > N`.
    pub fn truncate_tail(&self, n: f64) -> Self {
        let cut = n * (1.0 + 1e-12);
        self.masked(move |lam| lam > cut)
    }

    /// Push-forward by the translation `x ↦ x + α`: `c_k ↦ e^{-2πi⟨k,α⟩} c_k`.
    pub fn pushforward_rotation(&self, alpha: &RotationVector) -> Result<Self> {
        if alpha.dim() != self.dim {
            return Err(KamError::DimensionMismatch {
                expected: self.dim,
                found: alpha.dim(),
            });
        }
        let d = self.dim;
        let mb = self.mode_box();
        let mut out = self.coeffs.clone();
        par::for_each_chunk(&mut out, d, |i, chunk| {
            let ph = phase(alpha.turns(&mb.mode(i)));
            chunk.iter_mut().for_each(|c| *c *= ph);
        });
        Ok(Self::assemble(d, self.half_width, out))
    }

    /// Pointwise value `Σ_k c_k e^{2πi⟨k,x⟩}`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        Evaluator::new(self).eval_into(x, &mut out)?;
        Ok(out)
    }
}

/// `e^{-2πi t}`, exactly `1` at `t = 0`.
pub(crate) fn phase(turns: f64) -> Complex64 {
    if turns == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let (s, c) = (2.0 * PI * turns).sin_cos();
    Complex64::new(c, -s)
}

pub(crate) fn vec_norm(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Direct Fourier summation at arbitrary points, reusable across many points.
pub struct Evaluator<'a> {
    field: &'a FourierField,
    tol: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(field: &'a FourierField) -> Self {
        let tol = 1e-13 * field.sup_majorant(0.0) + 1e-300;
        Self { field, tol }
    }

    pub fn dim(&self) -> usize {
        self.field.dim
    }

    /// Evaluate at `x`, writing the real vector into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let f = self.field;
        let d = f.dim;
        let kk = f.half_width as i64;
        let side = f.mode_box().side();
        if f.half_width == 0 {
            for a in 0..d {
                out[a] = f.coeffs[a].re;
                if f.coeffs[a].im.abs() > self.tol {
                    return Err(KamError::RealityViolation {
                        imag: f.coeffs[a].im.abs(),
                    });
                }
            }
            return Ok(());
        }
        // per-axis phases e^{2πi k x_a}
        let mut tables = Vec::with_capacity(d);
        for &xa in x.iter().take(d) {
            let t: Vec<Complex64> = (-kk..=kk)
                .map(|k| {
                    let turns = (k as f64 * xa).rem_euclid(1.0);
                    phase(turns).conj()
                })
                .collect();
            tables.push(t);
        }
        // contract the coefficient tensor one axis at a time, last axis first
        let mut cur: Vec<Complex64> = f.coeffs.clone();
        let mut len = f.coeffs.len() / d;
        for a in (0..d).rev() {
            let outer = len / side;
            let mut next = vec![Complex64::new(0.0, 0.0); outer * d];
            let t = &tables[a];
            for o in 0..outer {
                for (j, ph) in t.iter().enumerate() {
                    let base = (o * side + j) * d;
                    for c in 0..d {
                        next[o * d + c] += cur[base + c] * ph;
                    }
                }
            }
            cur = next;
            len = outer;
        }
        for c in 0..d {
            if cur[c].im.abs() > self.tol {
                return Err(KamError::RealityViolation {
                    imag: cur[c].im.abs(),
                });
            }
            out[c] = cur[c].re;
        }
        Ok(())
    }
}
