use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{vec_norm, Evaluator, FourierField, ModeBox};
use crate::error::{KamError, Result};
use crate::par;

/// Sampling budget for grid-based operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Half-width `K` of the output support box.
    pub working_box: usize,
    /// Oversampling factor: the grid has `quality·(2K+1)` points per axis.
    pub quality: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            working_box: 8,
            quality: 4,
        }
    }
}

impl GridConfig {
    pub fn points_per_axis(&self) -> usize {
        self.quality * (2 * self.working_box + 1)
    }
}

/// A field recovered from grid samples, with the `ℓ¹` mass of the resolved
/// spectrum that fell outside the working box.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub field: FourierField,
    pub tail_majorant: f64,
}

/// Sample `f` on the uniform grid `{g/n}` and transform back to Fourier
/// coefficients on the working box.
pub fn sample_on_grid<F>(dim: usize, cfg: &GridConfig, f: F) -> Result<Sampled>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync + Send,
{
    if cfg.quality < 2 {
        return Err(KamError::InvalidParameter(format!(
            "oversampling factor must be >= 2, got {}",
            cfg.quality
        )));
    }
    let n = cfg.points_per_axis();
    let npts = n.pow(dim as u32);
    let samples = par::map_range(npts, |p| -> Result<Vec<f64>> {
        let mut x = vec![0.0; dim];
        let mut rem = p;
        for a in (0..dim).rev() {
            x[a] = (rem % n) as f64 / n as f64;
            rem /= n;
        }
        let mut v = vec![0.0; dim];
        f(&x, &mut v)?;
        Ok(v)
    });
    let mut values = Vec::with_capacity(npts);
    for s in samples {
        values.push(s?);
    }

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let scale = 1.0 / npts as f64;
    let spectra: Vec<Vec<Complex64>> = (0..dim)
        .map(|c| {
            let mut buf: Vec<Complex64> = values
                .iter()
                .map(|v| Complex64::new(v[c] * scale, 0.0))
                .collect();
            fft_nd(&mut buf, n, dim, &fft);
            buf
        })
        .collect();

    let out_box = ModeBox::new(dim, cfg.working_box);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); out_box.len() * dim];
    for i in 0..out_box.len() {
        let k = out_box.mode(i);
        let j = grid_index(&k, n);
        for c in 0..dim {
            coeffs[i * dim + c] = spectra[c][j];
        }
    }
    let mut tail = 0.0;
    let half = cfg.working_box as i64;
    let mut comp = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..npts {
        let mut rem = j;
        let mut inside = true;
        for _ in 0..dim {
            let g = (rem % n) as i64;
            rem /= n;
            let freq = if g <= (n as i64) / 2 { g } else { g - n as i64 };
            if freq.abs() > half {
                inside = false;
            }
        }
        if !inside {
            for c in 0..dim {
                comp[c] = spectra[c][j];
            }
            tail += vec_norm(&comp);
        }
    }
    let raw = FourierField::assemble(dim, cfg.working_box, coeffs);
    Ok(Sampled {
        field: raw.symmetrized(),
        tail_majorant: tail,
    })
}

fn grid_index(k: &[i64], n: usize) -> usize {
    let mut idx = 0usize;
    for &ka in k {
        idx = idx * n + ka.rem_euclid(n as i64) as usize;
    }
    idx
}

fn fft_nd(buf: &mut [Complex64], n: usize, dim: usize, fft: &Arc<dyn Fft<f64>>) {
    let total = buf.len();
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let nlines = total / n;
        let lines: Vec<Vec<Complex64>> = par::map_range(nlines, |line| {
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * stride * n + inner;
            let mut v: Vec<Complex64> = (0..n).map(|t| buf[base + t * stride]).collect();
            fft.process(&mut v);
            v
        });
        for (line, v) in lines.into_iter().enumerate() {
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * stride * n + inner;
            for (t, z) in v.into_iter().enumerate() {
                buf[base + t * stride] = z;
            }
        }
    }
}

/// `v ∘ (id + u)`, sampled on the oversampled grid and re-expanded on the
/// working box. Requires the near-identity condition `|u|_{1,0} < 1`.
pub fn compose_displacement(v: &FourierField, u: &FourierField, cfg: &GridConfig) -> Result<Sampled> {
    if v.dim() != u.dim() {
        return Err(KamError::DimensionMismatch {
            expected: v.dim(),
            found: u.dim(),
        });
    }
    let deriv = u.deriv_majorant(0.0);
    if deriv >= 1.0 {
        return Err(KamError::DisplacementTooLarge { deriv, gate: 1.0 });
    }
    let n = cfg.points_per_axis();
    let required = 2 * v.half_width().max(u.half_width()) + 1;
    if cfg.quality >= 2 && n < required {
        return Err(KamError::GridTooSmall { have: n, required });
    }
    if u.is_zero() {
        return sample_on_grid(v.dim(), cfg, |x, out| Evaluator::new(v).eval_into(x, out));
    }
    let ev = Evaluator::new(v);
    let eu = Evaluator::new(u);
    let d = v.dim();
    sample_on_grid(d, cfg, |x, out| {
        let mut disp = vec![0.0; d];
        eu.eval_into(x, &mut disp)?;
        for a in 0..d {
            disp[a] += x[a];
        }
        ev.eval_into(&disp, out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::RotationVector;
    use std::f64::consts::PI;

    fn cfg() -> GridConfig {
        GridConfig {
            working_box: 8,
            quality: 4,
        }
    }

    #[test]
    fn zero_displacement_round_trips() {
        let v = FourierField::from_trig_terms(
            2,
            &[(vec![1, 2], 0, 0.3, 0.1), (vec![-3, 1], 1, 0.0, 0.2), (vec![0, 0], 0, 0.7, 0.0)],
        )
        .unwrap();
        let out = compose_displacement(&v, &FourierField::zero(2), &cfg()).unwrap();
        let diff = out.field.sub(&v).unwrap().sup_majorant(0.0);
        assert!(diff <= 1e-14 * v.sup_majorant(0.0), "{diff}");
        assert!(out.tail_majorant < 1e-14);
    }

    #[test]
    fn constant_field_composes_trivially() {
        let v = FourierField::constant(&[0.4]);
        let u = FourierField::from_trig_terms(1, &[(vec![2], 0, 0.01, 0.02)]).unwrap();
        let out = compose_displacement(&v, &u, &cfg()).unwrap();
        assert!(out.field.sub(&v).unwrap().sup_majorant(0.0) < 1e-15);
    }

    #[test]
    fn constant_shift_is_a_rotation() {
        let v = FourierField::from_trig_terms(1, &[(vec![1], 0, 1.0, 0.0)]).unwrap();
        let delta = 0.01;
        let u = FourierField::constant(&[delta]);
        let out = compose_displacement(&v, &u, &cfg()).unwrap();
        let expected = v
            .pushforward_rotation(&RotationVector::from_f64(vec![-delta]))
            .unwrap();
        for k in [-1i64, 1] {
            let want = v.coeff(&[k])[0] * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * delta);
            assert!((out.field.coeff(&[k])[0] - want).norm() < 1e-13);
        }
        assert!(out.field.sub(&expected).unwrap().sup_majorant(0.0) < 1e-13);
    }

    #[test]
    fn rejects_large_displacement_and_small_grids() {
        let v = FourierField::from_trig_terms(1, &[(vec![1], 0, 1.0, 0.0)]).unwrap();
        let u = FourierField::from_trig_terms(1, &[(vec![1], 0, 0.5, 0.0)]).unwrap();
        assert!(matches!(
            compose_displacement(&v, &u, &cfg()),
            Err(KamError::DisplacementTooLarge { .. })
        ));
        let wide = FourierField::from_trig_terms(1, &[(vec![40], 0, 1.0, 0.0)]).unwrap();
        let small = GridConfig {
            working_box: 2,
            quality: 2,
        };
        assert!(matches!(
            compose_displacement(&wide, &FourierField::zero(1), &small),
            Err(KamError::GridTooSmall { have: 10, required: 81 })
        ));
    }
}
