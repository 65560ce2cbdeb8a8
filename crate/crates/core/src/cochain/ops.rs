//! Field-level differentials built directly from rotation push-forwards.
//! These are independent of the per-mode matrices in `blocks`, which the
//! tests exploit to cross-check the two assemblies.

use super::{BoxOperator, Cochain, Convention};
use crate::error::Result;
use crate::field::FourierField;
use crate::presentation::Letter;

impl BoxOperator {
    /// `d0 v = (v - π(γ_l)_* v)_l`.
    pub fn d0(&self, v: &FourierField) -> Result<Cochain> {
        let comps = self
            .cochain_letters()
            .into_iter()
            .map(|l| v.sub(&v.pushforward_rotation(self.action().alpha(l))?))
            .collect::<Result<Vec<_>>>()?;
        Cochain::new(comps)
    }

    /// `d0^* U = Σ_l (U_l - π(γ_l)_*⁻¹ U_l)`.
    pub fn d0_star(&self, u: &Cochain) -> Result<FourierField> {
        self.check_cochain(u)?;
        let mut acc = FourierField::zero(self.dim());
        for (l, c) in self.cochain_letters().into_iter().zip(u.components()) {
            let back = c.pushforward_rotation(&self.action().alpha(l).neg())?;
            acc = acc.add(&c.sub(&back)?)?;
        }
        Ok(acc)
    }

    /// Tie inverse letters to generators: `v_{i+ν} = -π(γ_i⁻¹)_* v_i`.
    pub fn extend(&self, u: &Cochain) -> Result<Cochain> {
        let nu = self.presentation().num_generators();
        let mut comps = u.components().to_vec();
        for i in 0..nu {
            let inv = Letter(i + nu);
            comps.push(u.get(i).pushforward_rotation(self.action().alpha(inv))?.scale(-1.0));
        }
        Cochain::new(comps)
    }

    fn as_all_letters(&self, u: &Cochain) -> Result<Cochain> {
        match self.convention() {
            Convention::AllLetters => Ok(u.clone()),
            Convention::InverseConvention => self.extend(u),
        }
    }

    /// `(d1 V)_j = Σ_l Σ_{w∈S_{j,l}} π(w)_* V_l`.
    pub fn d1(&self, u: &Cochain) -> Result<Cochain> {
        self.check_cochain(u)?;
        let full = self.as_all_letters(u)?;
        let p = self.presentation();
        let mut out = Vec::with_capacity(p.num_relators());
        for j in 0..p.num_relators() {
            let mut acc = FourierField::zero(self.dim());
            for l in p.letters() {
                for &q in p.subwords(j, l) {
                    let moved = full.get(l.0).pushforward_rotation(self.prefix_rotation(j, q))?;
                    acc = acc.add(&moved)?;
                }
            }
            out.push(acc);
        }
        Cochain::new(out)
    }

    /// `(d1^* W)_l = Σ_j Σ_{w∈S_{j,l}} π(w⁻¹)_* W_j`.
    pub fn d1_star(&self, w: &Cochain) -> Result<Cochain> {
        let p = self.presentation();
        if w.len() != p.num_relators() {
            return Err(crate::KamError::DimensionMismatch {
                expected: p.num_relators(),
                found: w.len(),
            });
        }
        let mut full = Vec::with_capacity(p.num_letters());
        for l in p.letters() {
            let mut acc = FourierField::zero(self.dim());
            for j in 0..p.num_relators() {
                for &q in p.subwords(j, l) {
                    let moved = w.get(j).pushforward_rotation(&self.prefix_rotation(j, q).neg())?;
                    acc = acc.add(&moved)?;
                }
            }
            full.push(acc);
        }
        match self.convention() {
            Convention::AllLetters => Cochain::new(full),
            Convention::InverseConvention => {
                let nu = p.num_generators();
                let comps = (0..nu)
                    .map(|i| {
                        let inv = Letter(i + nu);
                        let back = full[i + nu].pushforward_rotation(&self.action().alpha(inv).neg())?;
                        full[i].sub(&back)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Cochain::new(comps)
            }
        }
    }

    /// `□U = d0 d0^* U + d1^* d1 U`, composed from the field-level operators.
    pub fn box_apply_fields(&self, u: &Cochain) -> Result<Cochain> {
        let a = self.d0(&self.d0_star(u)?)?;
        let b = self.d1_star(&self.d1(u)?)?;
        a.add(&b)
    }
}
