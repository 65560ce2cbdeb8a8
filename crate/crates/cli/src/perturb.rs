//! Initial perturbations `P₀` from a scenario's perturbation source.

use std::fs;

use log::{info, warn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use torus_kam::field::{lambda, FieldRecord, ModeBox};
use torus_kam::moser::{check_points, relator_residuals, MapResiduals};
use torus_kam::{Cochain, FourierField, Letter, Moser, NearIdentityMap};

use crate::config::{PerturbationSource, Scenario};
use crate::CliError;

/// What `synthesize` writes and the `file` source reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFile {
    pub scenario: String,
    pub dimension: usize,
    /// One field per letter, generators first.
    pub letters: Vec<FieldRecord>,
    /// The conjugacy the perturbation was built from, when known.
    pub conjugacy: Option<FieldRecord>,
    pub relator_residuals: Vec<f64>,
    pub inverse_residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub cochain: Cochain,
    pub truth: Option<FourierField>,
    pub residuals: MapResiduals,
}

pub fn moser_for(s: &Scenario) -> Moser {
    let k = s.config.kam_config();
    Moser::new(k.gates, k.grid)
}

pub fn build(s: &Scenario) -> Result<Perturbation, CliError> {
    let d = s.config.dimension;
    let moser = moser_for(s);
    let (cochain, truth) = match &s.config.perturbation {
        PerturbationSource::Synthesized { terms } => {
            let t: Vec<(Vec<i64>, usize, f64, f64)> =
                terms.iter().map(|t| (t.k.clone(), t.component, t.cos, t.sin)).collect();
            let y = if t.is_empty() {
                FourierField::zero(d)
            } else {
                FourierField::from_trig_terms(d, &t)?
            };
            info!(
                "synthesizing from y with sup majorant {:.6e}, derivative majorant {:.6e}",
                y.sup_majorant(0.0),
                y.deriv_majorant(0.0)
            );
            (moser.synthesize_action(&s.presentation, &s.action, &y)?, Some(y))
        }
        PerturbationSource::File { path } => {
            let p = s.base_dir.join(path);
            let text = fs::read_to_string(&p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let file: PerturbationFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid perturbation file {}: {e}", p.display())))?;
            from_file(s, &file)?
        }
        PerturbationSource::Random {
            amplitude,
            decay,
            half_width,
        } => (random(s, *amplitude, *decay, *half_width, &moser)?, None),
    };
    let residuals = relator_residuals(&s.presentation, &s.action, &cochain, &check_points(d, s.config.seed))?;
    info!(
        "initial perturbation: ‖P₀‖_(S,r₀) = {:.6e}, relator/inverse residual {:.3e}",
        cochain.norm(s.config.schedule.r0),
        residuals.max()
    );
    Ok(Perturbation {
        cochain,
        truth,
        residuals,
    })
}

fn from_file(s: &Scenario, file: &PerturbationFile) -> Result<(Cochain, Option<FourierField>), CliError> {
    let want = s.presentation.num_letters();
    if file.dimension != s.config.dimension || file.letters.len() != want {
        return Err(CliError::Config(format!(
            "perturbation file has {} letters in dimension {}, scenario needs {want} in dimension {}",
            file.letters.len(),
            file.dimension,
            s.config.dimension
        )));
    }
    let comps = file
        .letters
        .iter()
        .map(|r| r.to_field())
        .collect::<Result<Vec<_>, _>>()?;
    let truth = file.conjugacy.as_ref().map(|r| r.to_field()).transpose()?;
    Ok((Cochain::new(comps)?, truth))
}

/// Random generator perturbations; the inverse letters are the exact
/// inverses `π₀(γ⁻¹) = π₀(γ)⁻¹`, i.e. `P_{γ⁻¹}(z) = h(z + α)` with `Exp{h} = Exp{P_γ}⁻¹`.
fn random(s: &Scenario, amplitude: f64, decay: f64, hw: usize, moser: &Moser) -> Result<Cochain, CliError> {
    let d = s.config.dimension;
    let nu = s.presentation.num_generators();
    if s.presentation.num_relators() > 0 {
        warn!("random perturbations generally break the relators; expect large relator residuals");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.config.seed);
    let mb = ModeBox::new(d, hw);
    let mut gens = Vec::with_capacity(nu);
    for _ in 0..nu {
        let mut c = Vec::with_capacity(mb.len() * d);
        for i in 0..mb.len() {
            let scale = amplitude * (-decay * lambda(&mb.mode(i))).exp();
            for _ in 0..d {
                c.push(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale);
            }
        }
        gens.push(FourierField::from_dense(d, hw, c)?.symmetrized());
    }
    let mut letters = gens.clone();
    for (i, p) in gens.iter().enumerate() {
        let (h, defect) = moser.invert(&NearIdentityMap::new(p.clone(), s.config.schedule.r0)?)?;
        info!("inverse of generator {}: round-trip defect {defect:.3e}", i + 1);
        let alpha = s.action.alpha(Letter(i));
        letters.push(h.displacement.pushforward_rotation(&alpha.neg())?);
    }
    Ok(Cochain::new(letters)?)
}

pub fn to_file(s: &Scenario, p: &Perturbation) -> PerturbationFile {
    PerturbationFile {
        scenario: s.config.name.clone(),
        dimension: s.config.dimension,
        letters: p.cochain.components().iter().map(FieldRecord::from).collect(),
        conjugacy: p.truth.as_ref().map(FieldRecord::from),
        relator_residuals: p.residuals.relators.clone(),
        inverse_residuals: p.residuals.inverses.clone(),
    }
}
