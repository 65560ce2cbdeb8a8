//! Finitely presented groups and their actions by rotations of the torus.

use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};

/// A letter of the alphabet `S`: generator `i` is letter `i`, its inverse is
/// letter `i + ν` (0-based internally, 1-based in user-facing text).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter(pub usize);

impl Letter {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 + 1)
    }
}

/// A finitely presented group: `ν` generators, their inverses, and relator
/// words over the `2ν` letters, together with the prefix tables that drive
/// `d1` and its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Presentation {
    num_generators: usize,
    relators: Vec<Vec<Letter>>,
    /// `subword_tables[j][l]` lists the lengths of the proper prefixes `w` of
    /// relator `j` such that `w·γ_l` is again a prefix.
    subword_tables: Vec<Vec<Vec<usize>>>,
}

impl Presentation {
    /// Build from relator words given as 1-based letter indices in `[1, 2ν]`.
    pub fn new(num_generators: usize, relator_words: &[Vec<usize>]) -> Result<Self> {
        if num_generators == 0 {
            return Err(KamError::InvalidParameter(
                "a presentation needs at least one generator".into(),
            ));
        }
        let max = 2 * num_generators;
        let mut relators = Vec::with_capacity(relator_words.len());
        for (j, word) in relator_words.iter().enumerate() {
            if word.is_empty() {
                return Err(KamError::EmptyRelator { relator: j });
            }
            let mut letters = Vec::with_capacity(word.len());
            for (q, &l) in word.iter().enumerate() {
                if l == 0 || l > max {
                    return Err(KamError::InvalidLetter {
                        relator: j,
                        position: q,
                        letter: l as i64,
                        max,
                    });
                }
                letters.push(Letter(l - 1));
            }
            relators.push(letters);
        }
        let subword_tables = relators
            .iter()
            .map(|w| prefix_table(w, max))
            .collect::<Vec<_>>();
        Ok(Self {
            num_generators,
            relators,
            subword_tables,
        })
    }

    /// Build from relators written as signed generator indices
    /// (`+i` is generator `i`, `-i` its inverse, both 1-based).
    pub fn from_signed(num_generators: usize, relators: &[Vec<i64>]) -> Result<Self> {
        let nu = num_generators as i64;
        let mut words = Vec::with_capacity(relators.len());
        for (j, r) in relators.iter().enumerate() {
            let mut word = Vec::with_capacity(r.len());
            for (q, &g) in r.iter().enumerate() {
                if g == 0 || g.abs() > nu {
                    return Err(KamError::InvalidLetter {
                        relator: j,
                        position: q,
                        letter: g,
                        max: num_generators,
                    });
                }
                word.push(if g > 0 { g as usize } else { (-g + nu) as usize });
            }
            words.push(word);
        }
        Self::new(num_generators, &words)
    }

    /// The free abelian group `Z^m` with its `m(m-1)/2` commutators
    /// `γ_i γ_j γ_i⁻¹ γ_j⁻¹`, `i < j`.
    pub fn free_abelian(m: usize) -> Result<Self> {
        let mut words = Vec::new();
        for i in 1..=m {
            for j in (i + 1)..=m {
                words.push(vec![i, j, i + m, j + m]);
            }
        }
        Self::new(m, &words)
    }

    pub fn num_generators(&self) -> usize {
        self.num_generators
    }

    pub fn num_letters(&self) -> usize {
        2 * self.num_generators
    }

    pub fn num_relators(&self) -> usize {
        self.relators.len()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.num_letters()).map(Letter)
    }

    pub fn inverse(&self, l: Letter) -> Letter {
        Letter((l.0 + self.num_generators) % self.num_letters())
    }

    pub fn is_generator(&self, l: Letter) -> bool {
        l.0 < self.num_generators
    }

    pub fn relators(&self) -> &[Vec<Letter>] {
        &self.relators
    }

    /// Prefix lengths `|w|` for `w ∈ S_{j,l}`.
    pub fn subwords(&self, relator: usize, letter: Letter) -> &[usize] {
        &self.subword_tables[relator][letter.0]
    }

    pub fn subword_tables(&self) -> &[Vec<Vec<usize>>] {
        &self.subword_tables
    }

    /// Relators rendered as signed generator indices.
    pub fn signed_relators(&self) -> Vec<Vec<i64>> {
        let nu = self.num_generators;
        self.relators
            .iter()
            .map(|w| {
                w.iter()
                    .map(|l| {
                        if l.0 < nu {
                            l.0 as i64 + 1
                        } else {
                            -((l.0 - nu) as i64 + 1)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn prefix_table(word: &[Letter], num_letters: usize) -> Vec<Vec<usize>> {
    let mut table = vec![Vec::new(); num_letters];
    for (q, l) in word.iter().enumerate() {
        table[l.0].push(q);
    }
    table
}

/// A rotation vector in `R^d`, optionally carrying an exact rational value.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationVector {
    approx: Vec<f64>,
    exact: Option<Vec<Rational64>>,
}

impl RotationVector {
    pub fn from_f64(v: Vec<f64>) -> Self {
        Self {
            approx: v,
            exact: None,
        }
    }

    pub fn from_rational(v: Vec<Rational64>) -> Self {
        let approx = v
            .iter()
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
            .collect();
        Self {
            approx,
            exact: Some(v),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self::from_rational(vec![Rational64::from_integer(0); d])
    }

    pub fn dim(&self) -> usize {
        self.approx.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.approx
    }

    pub fn exact(&self) -> Option<&[Rational64]> {
        self.exact.as_deref()
    }

    pub fn neg(&self) -> Self {
        Self {
            approx: self.approx.iter().map(|x| -x).collect(),
            exact: self.exact.as_ref().map(|e| e.iter().map(|r| -r).collect()),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let approx = self
            .approx
            .iter()
            .zip(&other.approx)
            .map(|(a, b)| a + b)
            .collect();
        let exact = match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        Self { approx, exact }
    }

    /// Fractional part of `⟨k, α⟩` in `[0, 1)`, exact when the vector is rational.
    pub fn turns(&self, k: &[i64]) -> f64 {
        if let Some(e) = &self.exact {
            let mut s = Rational64::from_integer(0);
            for (ka, ra) in k.iter().zip(e) {
                s += (Rational64::from_integer(*ka) * ra).fract();
            }
            let f = s.fract();
            let f = if f < Rational64::from_integer(0) {
                f + 1
            } else {
                f
            };
            return *f.numer() as f64 / *f.denom() as f64;
        }
        let mut s = 0.0;
        for (ka, a) in k.iter().zip(&self.approx) {
            s += (*ka as f64 * a.rem_euclid(1.0)).rem_euclid(1.0);
        }
        let f = s.rem_euclid(1.0);
        if f >= 1.0 {
            0.0
        } else {
            f
        }
    }

    /// Signed offset of each component to the nearest integer.
    pub fn lattice_offset(&self) -> Vec<f64> {
        if let Some(e) = &self.exact {
            return e
                .iter()
                .map(|r| {
                    let d = r - r.round();
                    *d.numer() as f64 / *d.denom() as f64
                })
                .collect();
        }
        self.approx.iter().map(|x| x - x.round()).collect()
    }
}

/// An action of a presented group on `T^d` by rotations: one rotation vector
/// per letter.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationAction {
    dim: usize,
    alpha: Vec<RotationVector>,
}

impl RotationAction {
    /// Assign rotation vectors to the generators; inverses get `-α`.
    pub fn from_generators(p: &Presentation, generators: Vec<RotationVector>) -> Result<Self> {
        if generators.len() != p.num_generators() {
            return Err(KamError::DimensionMismatch {
                expected: p.num_generators(),
                found: generators.len(),
            });
        }
        let dim = generators[0].dim();
        if dim == 0 {
            return Err(KamError::InvalidParameter("dimension must be >= 1".into()));
        }
        for g in &generators {
            if g.dim() != dim {
                return Err(KamError::DimensionMismatch {
                    expected: dim,
                    found: g.dim(),
                });
            }
        }
        let mut alpha = generators.clone();
        alpha.extend(generators.iter().map(RotationVector::neg));
        Ok(Self { dim, alpha })
    }

    /// Convenience wrapper over [`RotationAction::from_generators`] for float input.
    pub fn from_f64(p: &Presentation, generators: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_generators(
            p,
            generators.into_iter().map(RotationVector::from_f64).collect(),
        )
    }

    /// Assign every letter independently. The inverse pairing is not enforced
    /// here; [`check_action`] reports it.
    pub fn from_letters(p: &Presentation, letters: Vec<RotationVector>) -> Result<Self> {
        if letters.len() != p.num_letters() {
            return Err(KamError::DimensionMismatch {
                expected: p.num_letters(),
                found: letters.len(),
            });
        }
        let dim = letters[0].dim();
        Ok(Self { dim, alpha: letters })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self, l: Letter) -> &RotationVector {
        &self.alpha[l.0]
    }

    pub fn num_letters(&self) -> usize {
        self.alpha.len()
    }

    /// Rotation vector of the word `letters` (sum of its letters' vectors).
    pub fn word_rotation(&self, letters: &[Letter]) -> RotationVector {
        letters
            .iter()
            .fold(RotationVector::zeros(self.dim), |acc, l| {
                acc.add(&self.alpha[l.0])
            })
    }

    /// Rotation vectors of all prefixes of `word`, lengths `0..=|word|`.
    pub fn prefix_rotations(&self, word: &[Letter]) -> Vec<RotationVector> {
        let mut out = Vec::with_capacity(word.len() + 1);
        out.push(RotationVector::zeros(self.dim));
        for l in word {
            let next = out.last().unwrap().add(&self.alpha[l.0]);
            out.push(next);
        }
        out
    }
}

/// Residuals of an action against the group law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    /// Per relator, offset of the summed rotation vector to the nearest lattice point.
    pub relator_residuals: Vec<Vec<f64>>,
    /// Per generator, offset of `α(γ) + α(γ⁻¹)` to the nearest lattice point.
    pub inverse_residuals: Vec<Vec<f64>>,
}

impl ActionReport {
    pub fn max_relator_residual(&self) -> f64 {
        self.relator_residuals
            .iter()
            .map(|v| euclid(v))
            .fold(0.0, f64::max)
    }

    pub fn max_inverse_residual(&self) -> f64 {
        self.inverse_residuals
            .iter()
            .map(|v| euclid(v))
            .fold(0.0, f64::max)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_relator_residual() <= tol && self.max_inverse_residual() <= tol
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Check that `a` is a genuine action of `p`: every relator's rotation sum
/// must vanish mod `Z^d` and inverse letters must carry opposite vectors.
pub fn check_action(p: &Presentation, a: &RotationAction) -> Result<ActionReport> {
    if a.num_letters() != p.num_letters() {
        return Err(KamError::DimensionMismatch {
            expected: p.num_letters(),
            found: a.num_letters(),
        });
    }
    let relator_residuals = p
        .relators()
        .iter()
        .map(|w| a.word_rotation(w).lattice_offset())
        .collect();
    let inverse_residuals = (0..p.num_generators())
        .map(|i| {
            let l = Letter(i);
            a.alpha(l).add(a.alpha(p.inverse(l))).lattice_offset()
        })
        .collect();
    Ok(ActionReport {
        relator_residuals,
        inverse_residuals,
    })
}
