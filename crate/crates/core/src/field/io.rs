//! Flat record serialization of fields and decay tables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{lambda, vec_norm, FourierField};
use crate::error::{KamError, Result};

/// One stored mode: lattice vector plus real and imaginary parts per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub k: Vec<i64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// JSON form of a field: dimension, box half-width, and the nonzero modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub dimension: usize,
    pub half_width: usize,
    pub modes: Vec<ModeRecord>,
}

impl From<&FourierField> for FieldRecord {
    fn from(f: &FourierField) -> Self {
        let mb = f.mode_box();
        let modes = (0..mb.len())
            .filter(|&i| f.coeff_at(i).iter().any(|c| c.norm_sqr() > 0.0))
            .map(|i| {
                let c = f.coeff_at(i);
                ModeRecord {
                    k: mb.mode(i),
                    re: c.iter().map(|z| z.re).collect(),
                    im: c.iter().map(|z| z.im).collect(),
                }
            })
            .collect();
        Self {
            dimension: f.dim(),
            half_width: f.half_width(),
            modes,
        }
    }
}

impl FieldRecord {
    pub fn to_field(&self) -> Result<FourierField> {
        let d = self.dimension;
        let mb = super::ModeBox::new(d, self.half_width);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); mb.len() * d];
        for m in &self.modes {
            if m.k.len() != d || m.re.len() != d || m.im.len() != d {
                return Err(KamError::Serialization(format!(
                    "mode {:?} does not match dimension {d}",
                    m.k
                )));
            }
            let idx = mb.index(&m.k).ok_or_else(|| {
                KamError::Serialization(format!(
                    "mode {:?} outside box of half-width {}",
                    m.k, self.half_width
                ))
            })?;
            for a in 0..d {
                coeffs[idx * d + a] = Complex64::new(m.re[a], m.im[a]);
            }
        }
        let f = FourierField::from_dense(d, self.half_width, coeffs)?;
        let defect = f.reality_defect();
        if defect > 1e-12 * f.sup_majorant(0.0).max(1e-300) {
            return Err(KamError::RealityViolation { imag: defect });
        }
        Ok(f)
    }
}

/// `(|k|₂, λ_k, |c_k|)` rows for every stored nonzero mode, sorted by `|k|₂`.
pub fn decay_rows(f: &FourierField) -> Vec<(f64, f64, f64)> {
    let mb = f.mode_box();
    let mut rows: Vec<(f64, f64, f64)> = (0..mb.len())
        .filter_map(|i| {
            let m = vec_norm(f.coeff_at(i));
            if m == 0.0 {
                return None;
            }
            let k = mb.mode(i);
            let lam = lambda(&k);
            Some((lam / (2.0 * std::f64::consts::PI), lam, m))
        })
        .collect();
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let f = FourierField::from_trig_terms(2, &[(vec![1, -1], 1, 0.25, -0.5), (vec![0, 0], 0, 1.0, 0.0)])
            .unwrap();
        let rec = FieldRecord::from(&f);
        assert_eq!(rec.modes.len(), 3);
        let json = serde_json::to_string(&rec).unwrap();
        let back: FieldRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_field().unwrap(), f);
    }

    #[test]
    fn non_real_records_are_rejected() {
        let rec = FieldRecord {
            dimension: 1,
            half_width: 1,
            modes: vec![ModeRecord {
                k: vec![1],
                re: vec![1.0],
                im: vec![0.0],
            }],
        };
        assert!(rec.to_field().is_err());
    }

    #[test]
    fn decay_rows_sorted() {
        let f = FourierField::from_trig_terms(1, &[(vec![3], 0, 0.1, 0.0), (vec![1], 0, 1.0, 0.0)]).unwrap();
        let rows = decay_rows(&f);
        assert_eq!(rows.len(), 4);
        assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!((rows[0].2 - 0.5).abs() < 1e-15);
    }
}
