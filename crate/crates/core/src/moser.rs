//! Exponentials of vector fields on the flat torus, where `Exp{w}` is the
//! near-identity map `x ↦ x + w(x)`.
//!
//! Every composite is computed in displacement form: only the small terms are
//! sampled on the grid and re-expanded, never `x` itself, so the re-expanded
//! coefficients carry roundoff relative to the perturbation size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cochain::Cochain;
use crate::error::{KamError, Result};
use crate::field::{sample_on_grid, Evaluator, FourierField, GridConfig, Sampled};
use crate::par;
use crate::presentation::{Letter, Presentation, RotationAction, RotationVector};

/// Increment below which the pointwise inverse iteration stops.
const INVERSE_TOL: f64 = 1e-15;
const INVERSE_MAX_ITERS: usize = 60;

/// Run-time smallness thresholds for the composition calculus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoserGates {
    /// Upper bound on `deriv_majorant(·, 0)` of every displacement fed to a
    /// composition.
    pub max_deriv: f64,
}

impl Default for MoserGates {
    fn default() -> Self {
        Self { max_deriv: 0.1 }
    }
}

impl MoserGates {
    pub fn check(&self, f: &FourierField) -> Result<()> {
        let deriv = f.deriv_majorant(0.0);
        if deriv >= self.max_deriv {
            return Err(KamError::DisplacementTooLarge {
                deriv,
                gate: self.max_deriv,
            });
        }
        Ok(())
    }
}

/// `Exp{w}: x ↦ x + w(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NearIdentityMap {
    pub displacement: FourierField,
    /// Strip radius on which the displacement's norms were last controlled.
    pub radius: f64,
}

impl NearIdentityMap {
    pub fn new(displacement: FourierField, radius: f64) -> Result<Self> {
        let deriv = displacement.deriv_majorant(0.0);
        if deriv >= 1.0 {
            return Err(KamError::DisplacementTooLarge { deriv, gate: 1.0 });
        }
        Ok(Self { displacement, radius })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            displacement: FourierField::zero(dim),
            radius: f64::INFINITY,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.displacement.evaluate(x)?;
        Ok(x.iter().zip(&w).map(|(a, b)| a + b).collect())
    }

    /// Preimage of `y`, by the pointwise fixed point `t = -w(y + t)`.
    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let ev = Evaluator::new(&self.displacement);
        let mut t = vec![0.0; y.len()];
        inverse_at(&ev, y, &mut t)?;
        Ok(y.iter().zip(&t).map(|(a, b)| a + b).collect())
    }
}

/// `Exp{P}∘π(γ_l): x ↦ x + α_l + P(x + α_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedGenerator {
    pub letter: Letter,
    pub alpha: RotationVector,
    pub perturbation: FourierField,
    /// Accumulated `ℓ¹` mass discarded by grid re-expansions.
    pub error: f64,
}

impl PerturbedGenerator {
    pub fn new(letter: Letter, alpha: RotationVector, perturbation: FourierField) -> Self {
        Self {
            letter,
            alpha,
            perturbation,
            error: 0.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z: Vec<f64> = x.iter().zip(self.alpha.as_slice()).map(|(a, b)| a + b).collect();
        let p = self.perturbation.evaluate(&z)?;
        Ok(z.iter().zip(&p).map(|(a, b)| a + b).collect())
    }
}

/// Solve `t = -w(q + t)` in place, starting from the current `t`.
pub(crate) fn inverse_at(ev: &Evaluator, q: &[f64], t: &mut [f64]) -> Result<()> {
    let d = q.len();
    let mut pt = vec![0.0; d];
    let mut val = vec![0.0; d];
    let mut prev = f64::INFINITY;
    for it in 0..INVERSE_MAX_ITERS {
        for a in 0..d {
            pt[a] = q[a] + t[a];
        }
        ev.eval_into(&pt, &mut val)?;
        let mut inc = 0.0f64;
        for a in 0..d {
            inc = inc.max((-val[a] - t[a]).abs());
            t[a] = -val[a];
        }
        if inc < INVERSE_TOL {
            return Ok(());
        }
        if it >= 2 && inc > prev && inc > 1e-13 {
            return Err(KamError::NonContraction {
                iteration: it,
                increment: inc,
            });
        }
        prev = inc;
    }
    // Roundoff can keep the increment just above the stopping tolerance.
    if prev < 1e-13 {
        Ok(())
    } else {
        Err(KamError::NonContraction {
            iteration: INVERSE_MAX_ITERS,
            increment: prev,
        })
    }
}

fn shifted(x: &[f64], alpha: &[f64], sign: f64) -> Vec<f64> {
    x.iter().zip(alpha).map(|(a, b)| a + sign * b).collect()
}

/// The composition calculus with a fixed grid budget and gates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moser {
    pub gates: MoserGates,
    pub grid: GridConfig,
}

impl Moser {
    pub fn new(gates: MoserGates, grid: GridConfig) -> Self {
        Self { gates, grid }
    }

    /// `s1(w, v) = w∘(id + v) - w`, so that `Exp{w}∘Exp{v} = Exp{w + v + s1}`.
    pub fn s1(&self, w: &FourierField, v: &FourierField) -> Result<Sampled> {
        if w.dim() != v.dim() {
            return Err(KamError::DimensionMismatch {
                expected: w.dim(),
                found: v.dim(),
            });
        }
        if w.is_zero() || v.is_zero() {
            return Ok(Sampled {
                field: FourierField::zero_box(w.dim(), self.grid.working_box),
                tail_majorant: 0.0,
            });
        }
        self.gates.check(w)?;
        self.gates.check(v)?;
        let d = w.dim();
        let ew = Evaluator::new(w);
        let ev = Evaluator::new(v);
        sample_on_grid(d, &self.grid, |x, out| {
            let mut vx = vec![0.0; d];
            ev.eval_into(x, &mut vx)?;
            let mut w0 = vec![0.0; d];
            ew.eval_into(x, &mut w0)?;
            for a in 0..d {
                vx[a] += x[a];
            }
            ew.eval_into(&vx, out)?;
            for a in 0..d {
                out[a] -= w0[a];
            }
            Ok(())
        })
    }

    /// `W' = W + w + s1(W, w) = w + W∘(id + w)`, i.e. `Exp{W'} = Exp{W}∘Exp{w}`.
    pub fn accumulate(&self, big_w: &FourierField, w: &FourierField) -> Result<Sampled> {
        if big_w.is_zero() {
            return Ok(Sampled {
                field: w.clone(),
                tail_majorant: 0.0,
            });
        }
        if w.is_zero() {
            return Ok(Sampled {
                field: big_w.clone(),
                tail_majorant: 0.0,
            });
        }
        self.gates.check(big_w)?;
        self.gates.check(w)?;
        let d = w.dim();
        let eb = Evaluator::new(big_w);
        let es = Evaluator::new(w);
        sample_on_grid(d, &self.grid, |x, out| {
            let mut wx = vec![0.0; d];
            es.eval_into(x, &mut wx)?;
            let p: Vec<f64> = x.iter().zip(&wx).map(|(a, b)| a + b).collect();
            eb.eval_into(&p, out)?;
            for a in 0..d {
                out[a] += wx[a];
            }
            Ok(())
        })
    }

    /// Inverse of `Exp{w}` as `Exp{h}` with `h = -w∘(id + h)`. Also returns
    /// the round-trip defect `sup_majorant(h + w∘(id + h), 0)`.
    pub fn invert(&self, map: &NearIdentityMap) -> Result<(NearIdentityMap, f64)> {
        let w = &map.displacement;
        let deriv = w.deriv_majorant(0.0);
        if deriv > 0.5 {
            return Err(KamError::DisplacementTooLarge { deriv, gate: 0.5 });
        }
        let d = w.dim();
        if w.half_width() == 0 {
            // Translations invert exactly.
            return Ok((NearIdentityMap::new(w.scale(-1.0), map.radius)?, 0.0));
        }
        let ew = Evaluator::new(w);
        let h = sample_on_grid(d, &self.grid, |x, out| {
            out.iter_mut().for_each(|t| *t = 0.0);
            inverse_at(&ew, x, out)
        })?;
        let eh = Evaluator::new(&h.field);
        let defect = sample_on_grid(d, &self.grid, |x, out| {
            let mut hx = vec![0.0; d];
            eh.eval_into(x, &mut hx)?;
            let p: Vec<f64> = x.iter().zip(&hx).map(|(a, b)| a + b).collect();
            ew.eval_into(&p, out)?;
            for a in 0..d {
                out[a] += hx[a];
            }
            Ok(())
        })?;
        let resid = defect.field.sup_majorant(0.0) + defect.tail_majorant;
        Ok((
            NearIdentityMap {
                displacement: h.field,
                radius: map.radius,
            },
            resid,
        ))
    }

    /// `Exp{w}⁻¹∘Exp{P}∘π(γ)∘Exp{w} = Exp{P'}∘π(γ)`, with
    /// `P'(z) = w(z-α) + P(z + w(z-α)) + t` and `t = -w(q + t)` at the image
    /// point `q = z + w(z-α) + P(z + w(z-α))`.
    pub fn conjugate_generator(&self, g: &PerturbedGenerator, w: &FourierField) -> Result<PerturbedGenerator> {
        if w.is_zero() {
            return Ok(g.clone());
        }
        self.gates.check(w)?;
        if !g.perturbation.is_zero() {
            self.gates.check(&g.perturbation)?;
        }
        let d = w.dim();
        let ew = Evaluator::new(w);
        let ep = Evaluator::new(&g.perturbation);
        let alpha = g.alpha.as_slice();
        let s = sample_on_grid(d, &self.grid, |z, out| {
            let mut wz = vec![0.0; d];
            ew.eval_into(&shifted(z, alpha, -1.0), &mut wz)?;
            let y: Vec<f64> = z.iter().zip(&wz).map(|(a, b)| a + b).collect();
            let mut py = vec![0.0; d];
            ep.eval_into(&y, &mut py)?;
            let q: Vec<f64> = y.iter().zip(&py).map(|(a, b)| a + b).collect();
            let mut t: Vec<f64> = wz.iter().map(|v| -v).collect();
            inverse_at(&ew, &q, &mut t)?;
            for a in 0..d {
                out[a] = wz[a] + py[a] + t[a];
            }
            Ok(())
        })?;
        Ok(PerturbedGenerator {
            letter: g.letter,
            alpha: g.alpha.clone(),
            perturbation: s.field,
            error: g.error + s.tail_majorant,
        })
    }

    /// Perturbations `P_l` of `π₀(γ_l) = Exp{y}∘π(γ_l)∘Exp{y}⁻¹` for every
    /// letter, so `Exp{y}` conjugates `π₀` back to `π` by construction:
    /// `P(z) = t(z-α) + y(z + t(z-α))` with `t(x) = -y(x + t(x))`.
    pub fn synthesize_action(&self, p: &Presentation, action: &RotationAction, y: &FourierField) -> Result<Cochain> {
        if y.dim() != action.dim() {
            return Err(KamError::DimensionMismatch {
                expected: action.dim(),
                found: y.dim(),
            });
        }
        let letters: Vec<Letter> = p.letters().collect();
        if y.is_zero() || y.half_width() == 0 {
            return Ok(Cochain::zero(letters.len(), y.dim()));
        }
        self.gates.check(y)?;
        let d = y.dim();
        let ey = Evaluator::new(y);
        let comps = letters
            .iter()
            .map(|&l| {
                let alpha = action.alpha(l).as_slice();
                sample_on_grid(d, &self.grid, |z, out| {
                    let x = shifted(z, alpha, -1.0);
                    let mut t = vec![0.0; d];
                    inverse_at(&ey, &x, &mut t)?;
                    let q: Vec<f64> = z.iter().zip(&t).map(|(a, b)| a + b).collect();
                    ey.eval_into(&q, out)?;
                    for a in 0..d {
                        out[a] += t[a];
                    }
                    Ok(())
                })
                .map(|s| s.field)
            })
            .collect::<Result<Vec<_>>>()?;
        Cochain::new(comps)
    }
}

/// Residual `W(x) + P(x1 + α) + t` of `Exp{W}⁻¹∘π₀(γ)∘Exp{W}(x) - (x + α)`,
/// where `x1 = x + W(x)` and `t = -W(x1 + α + P(x1 + α) + t)`.
pub fn conjugated_displacement(
    ew: &Evaluator,
    ep: &Evaluator,
    alpha: &[f64],
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let d = x.len();
    let mut wx = vec![0.0; d];
    ew.eval_into(x, &mut wx)?;
    let z: Vec<f64> = (0..d).map(|a| x[a] + wx[a] + alpha[a]).collect();
    let mut pz = vec![0.0; d];
    ep.eval_into(&z, &mut pz)?;
    let q: Vec<f64> = (0..d).map(|a| z[a] + pz[a]).collect();
    let mut t: Vec<f64> = wx.iter().map(|v| -v).collect();
    inverse_at(ew, &q, &mut t)?;
    for a in 0..d {
        out[a] = wx[a] + pz[a] + t[a];
    }
    Ok(())
}

/// The `10^d` grid `{i/10}` plus 100 seeded uniform points.
pub fn check_points(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = 10usize.pow(dim as u32);
    let mut pts: Vec<Vec<f64>> = (0..n)
        .map(|p| {
            let mut rem = p;
            let mut x = vec![0.0; dim];
            for a in (0..dim).rev() {
                x[a] = (rem % 10) as f64 / 10.0;
                rem /= 10;
            }
            x
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        pts.push((0..dim).map(|_| rng.gen::<f64>()).collect());
    }
    pts
}

/// Distance of `v` to the lattice `Z^d` in the Euclidean norm.
pub fn torus_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| (x - x.round()).powi(2)).sum::<f64>().sqrt()
}

/// Relator composites `π₀(γ_{l_1})∘⋯∘π₀(γ_{l_m})` and inverse pairs
/// `π₀(γ)∘π₀(γ⁻¹)` measured against the identity at the given points.
#[derive(Debug, Clone, PartialEq)]
pub struct MapResiduals {
    pub relators: Vec<f64>,
    pub inverses: Vec<f64>,
}

impl MapResiduals {
    pub fn max(&self) -> f64 {
        self.relators
            .iter()
            .chain(&self.inverses)
            .copied()
            .fold(0.0, f64::max)
    }
}

pub fn relator_residuals(
    p: &Presentation,
    action: &RotationAction,
    perturbations: &Cochain,
    points: &[Vec<f64>],
) -> Result<MapResiduals> {
    if perturbations.len() != p.num_letters() {
        return Err(KamError::DimensionMismatch {
            expected: p.num_letters(),
            found: perturbations.len(),
        });
    }
    let gens: Vec<PerturbedGenerator> = p
        .letters()
        .map(|l| PerturbedGenerator::new(l, action.alpha(l).clone(), perturbations.get(l.0).clone()))
        .collect();
    let word_residual = |word: &[Letter]| -> Result<f64> {
        let errs = par::map_slice(points, |x| -> Result<f64> {
            let mut y = x.clone();
            for l in word.iter().rev() {
                y = gens[l.0].apply(&y)?;
            }
            let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            Ok(torus_norm(&diff))
        });
        let mut m = 0.0f64;
        for e in errs {
            m = m.max(e?);
        }
        Ok(m)
    };
    let relators = p
        .relators()
        .iter()
        .map(|w| word_residual(w))
        .collect::<Result<Vec<_>>>()?;
    let inverses = (0..p.num_generators())
        .map(|i| word_residual(&[Letter(i), p.inverse(Letter(i))]))
        .collect::<Result<Vec<_>>>()?;
    Ok(MapResiduals { relators, inverses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moser() -> Moser {
        Moser::new(
            MoserGates::default(),
            GridConfig {
                working_box: 8,
                quality: 4,
            },
        )
    }

    fn sin_field(a: f64) -> FourierField {
        // a·sin(2πx) = a(e^{2πix} - e^{-2πix})/(2i)
        FourierField::from_trig_terms(1, &[(vec![1], 0, 0.0, a)]).unwrap()
    }

    #[test]
    fn s1_vanishes_on_zero_inputs() {
        let m = moser();
        let w = sin_field(1e-3);
        assert!(m.s1(&w, &FourierField::zero(1)).unwrap().field.is_zero());
        assert!(m.s1(&FourierField::zero(1), &w).unwrap().field.is_zero());
    }

    #[test]
    fn s1_of_constant_shift_is_closed_form() {
        let m = moser();
        let a = 0.01;
        let b = 0.013;
        let w = FourierField::from_trig_terms(1, &[(vec![1], 0, a, 0.0)]).unwrap();
        let v = FourierField::constant(&[b]);
        let s = m.s1(&w, &v).unwrap().field;
        let shifted = w.pushforward_rotation(&RotationVector::from_f64(vec![-b])).unwrap();
        let want = shifted.sub(&w).unwrap().resized(8);
        let err = s.sub(&want).unwrap().sup_majorant(0.0);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn invert_translations_and_sine() {
        // Amplitude 0.01 needs a wider box than the 1e-3 fields elsewhere.
        let m = Moser::new(
            MoserGates::default(),
            GridConfig {
                working_box: 16,
                quality: 4,
            },
        );
        let c = NearIdentityMap::new(FourierField::constant(&[0.01]), 0.5).unwrap();
        let (h, _) = m.invert(&c).unwrap();
        assert_eq!(h.displacement.coeff(&[0])[0].re, -0.01);
        let w = NearIdentityMap::new(sin_field(0.01), 0.5).unwrap();
        let (h, defect) = m.invert(&w).unwrap();
        assert!(defect < 1e-13, "{defect}");
        for x in check_points(1, 7) {
            let y = w.apply(&h.apply(&x).unwrap()).unwrap();
            assert!((y[0] - x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn invert_rejects_large_displacement() {
        let m = moser();
        let w = NearIdentityMap::new(sin_field(0.1), 0.5).unwrap();
        assert!(matches!(m.invert(&w), Err(KamError::DisplacementTooLarge { .. })));
    }

    #[test]
    fn conjugating_back_by_synthesis_field_cancels() {
        let m = moser();
        let p = Presentation::new(1, &[]).unwrap();
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let a = RotationAction::from_f64(&p, vec![vec![g]]).unwrap();
        let y = sin_field(1e-3);
        let pert = m.synthesize_action(&p, &a, &y).unwrap();
        assert!(pert.norm(0.5) > 1e-4 && pert.norm(0.5) < 1e-1);
        for l in p.letters() {
            let gen = PerturbedGenerator::new(l, a.alpha(l).clone(), pert.get(l.0).clone());
            let back = m.conjugate_generator(&gen, &y).unwrap();
            // Grid roundoff sits near 1e-19 per coefficient, which the weight
            // e^{2πrK} amplifies; r = 1/4 keeps it well below the bound.
            let n = back.perturbation.weighted_norm(0.25);
            assert!(n < 1e-12, "{n:e}");
        }
        let res = relator_residuals(&p, &a, &pert, &check_points(1, 1)).unwrap();
        assert!(res.max() < 1e-13, "{:?}", res);
    }

    #[test]
    fn constant_conjugator_leaves_rotation_alone() {
        let m = moser();
        let gen = PerturbedGenerator::new(Letter(0), RotationVector::from_f64(vec![0.3]), FourierField::zero(1));
        let out = m.conjugate_generator(&gen, &FourierField::constant(&[0.02])).unwrap();
        assert!(out.perturbation.sup_majorant(0.0) < 1e-17);
    }

    #[test]
    fn accumulate_matches_map_composition() {
        let m = moser();
        let big = sin_field(2e-3);
        let w = FourierField::from_trig_terms(1, &[(vec![2], 0, 1e-3, 5e-4)]).unwrap();
        let acc = m.accumulate(&big, &w).unwrap().field;
        let eb = NearIdentityMap::new(big, 0.5).unwrap();
        let ew = NearIdentityMap::new(w, 0.5).unwrap();
        let ea = NearIdentityMap::new(acc, 0.5).unwrap();
        for x in check_points(1, 3) {
            let lhs = ea.apply(&x).unwrap();
            let rhs = eb.apply(&ew.apply(&x).unwrap()).unwrap();
            assert!((lhs[0] - rhs[0]).abs() < 1e-12);
        }
        let a = FourierField::constant(&[0.01]);
        let b = FourierField::constant(&[0.02]);
        let s = m.accumulate(&a, &b).unwrap().field;
        assert!((s.coeff(&[0])[0].re - 0.03).abs() < 1e-17);
    }

    #[test]
    fn check_points_layout() {
        let pts = check_points(2, 0);
        assert_eq!(pts.len(), 200);
        assert_eq!(pts[1], vec![0.0, 0.1]);
        assert!((torus_norm(&[0.999, -1.001]) - 2f64.sqrt() * 1e-3).abs() < 1e-12);
    }
}
