//! Scenario files: TOML (primary) or JSON.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use torus_kam::{
    check_action, Convention, GridConfig, HarmonicMode, KamConfig, MoserGates, Presentation, RotationAction,
    RotationVector,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub dimension: usize,
    pub generators: usize,
    /// Relators as signed 1-based generator indices: `[1, 2, -1, -2]` is the
    /// commutator.
    #[serde(default)]
    pub relators: Vec<Vec<i64>>,
    /// One vector per generator; entries are decimal strings or `p/q`.
    pub rotations: Vec<Vec<String>>,
    pub perturbation: PerturbationSource,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub spectrum: SpectrumParams,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> String {
    "out".into()
}

/// A real trigonometric term `cos·cos(2π⟨k,x⟩) + sin·sin(2π⟨k,x⟩)` in one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub component: usize,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSource {
    /// Conjugate the rotation action by `Exp{y}`, `y` given by its terms.
    Synthesized { terms: Vec<TrigTerm> },
    /// A file written by `synthesize`, relative to the scenario file.
    File { path: String },
    /// Independent random perturbations of the generators with coefficients
    /// of size `amplitude·e^{-decay·λ_k}` on the box of half-width `half_width`.
    Random {
        amplitude: f64,
        decay: f64,
        #[serde(default = "default_random_width")]
        half_width: usize,
    },
}

fn default_random_width() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub eps0: f64,
    pub r0: f64,
    pub zeta0: f64,
    pub tau: f64,
    pub max_steps: usize,
    pub harmonic_mode: HarmonicMode,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        let k = KamConfig::default();
        Self {
            eps0: k.eps0,
            r0: k.r0,
            zeta0: k.zeta0,
            tau: k.tau,
            max_steps: k.max_steps,
            harmonic_mode: k.harmonic_mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub target: f64,
    pub working_box: usize,
    pub quality: usize,
    pub max_deriv: f64,
    pub safety: f64,
    pub resonance_floor: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        let k = KamConfig::default();
        Self {
            target: k.target,
            working_box: k.grid.working_box,
            quality: k.grid.quality,
            max_deriv: k.gates.max_deriv,
            safety: k.safety,
            resonance_floor: k.resonance_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConventionName {
    /// `ν` generator components, inverse letters by `v_{i+ν} = -π(γ_i⁻¹)_* v_i`.
    #[default]
    Inverse,
    /// All `2ν` letters independent.
    All,
}

impl From<ConventionName> for Convention {
    fn from(c: ConventionName) -> Self {
        match c {
            ConventionName::Inverse => Convention::InverseConvention,
            ConventionName::All => Convention::AllLetters,
        }
    }
}

impl std::str::FromStr for ConventionName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inverse" => Ok(Self::Inverse),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown convention {s:?}; expected \"inverse\" or \"all\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub k_max: f64,
    pub tau: f64,
    pub convention: ConventionName,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            k_max: 50.0,
            tau: 2.0,
            convention: ConventionName::Inverse,
        }
    }
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Directory of the scenario file; relative paths resolve against it.
    pub base_dir: PathBuf,
    pub presentation: Presentation,
    pub action: RotationAction,
}

/// `p/q` or an integer parses exactly; anything else as a binary float.
pub fn parse_rotation_entry(s: &str) -> Result<(f64, Option<Rational64>), CliError> {
    let t = s.trim();
    if t.contains('/') || (!t.is_empty() && t.trim_start_matches('-').chars().all(|c| c.is_ascii_digit())) {
        let q: Rational64 = t
            .parse()
            .map_err(|e| CliError::Config(format!("bad rational rotation entry {s:?}: {e}")))?;
        return Ok((*q.numer() as f64 / *q.denom() as f64, Some(q)));
    }
    let x: f64 = t
        .parse()
        .map_err(|e| CliError::Config(format!("bad rotation entry {s:?}: {e}")))?;
    if !x.is_finite() {
        return Err(CliError::Config(format!("rotation entry {s:?} is not finite")));
    }
    Ok((x, None))
}

pub fn parse_rotation(entries: &[String]) -> Result<RotationVector, CliError> {
    let parsed = entries
        .iter()
        .map(|s| parse_rotation_entry(s))
        .collect::<Result<Vec<_>, _>>()?;
    if parsed.iter().all(|(_, q)| q.is_some()) {
        Ok(RotationVector::from_rational(parsed.into_iter().map(|(_, q)| q.unwrap()).collect()))
    } else {
        Ok(RotationVector::from_f64(parsed.into_iter().map(|(x, _)| x).collect()))
    }
}

impl ScenarioConfig {
    pub fn from_toml(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Config(format!("invalid TOML scenario: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("invalid JSON scenario: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Read a scenario, choosing the format by extension (`.json` or TOML).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn kam_config(&self) -> KamConfig {
        let s = &self.schedule;
        let n = &self.numerics;
        KamConfig {
            eps0: s.eps0,
            r0: s.r0,
            zeta0: s.zeta0,
            tau: s.tau,
            max_steps: s.max_steps,
            target: n.target,
            harmonic_mode: s.harmonic_mode,
            safety: n.safety,
            gates: MoserGates { max_deriv: n.max_deriv },
            grid: GridConfig {
                working_box: n.working_box,
                quality: n.quality,
            },
            resonance_floor: n.resonance_floor,
            seed: self.seed,
        }
    }

    /// Check the group data and referenced files, and build the action.
    pub fn validate(self, base_dir: &Path) -> Result<Scenario, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.rotations.len() != self.generators {
            return bad(format!(
                "{} rotation vectors given for {} generators",
                self.rotations.len(),
                self.generators
            ));
        }
        let presentation = Presentation::from_signed(self.generators, &self.relators)?;
        let mut gens = Vec::with_capacity(self.generators);
        for (i, r) in self.rotations.iter().enumerate() {
            if r.len() != self.dimension {
                return bad(format!("rotation {} has {} entries, expected {}", i + 1, r.len(), self.dimension));
            }
            let v = parse_rotation(r)?;
            info!("rotation {}: {:?} (exact: {})", i + 1, v.as_slice(), v.exact().is_some());
            gens.push(v);
        }
        let action = RotationAction::from_generators(&presentation, gens)?;
        let report = check_action(&presentation, &action)?;
        let exact = (0..self.generators).all(|i| action.alpha(torus_kam::Letter(i)).exact().is_some());
        let tol = if exact { 0.0 } else { 1e-14 };
        if !report.is_valid(tol) {
            return bad(format!(
                "rotations do not satisfy the relators: residual {:.3e} (tolerance {tol:e})",
                report.max_relator_residual().max(report.max_inverse_residual())
            ));
        }
        let s = &self.schedule;
        if !(s.eps0 > 0.0 && s.eps0 < 1.0) || !(s.r0 > 0.0) || !(s.tau >= 0.0) {
            return bad(format!("schedule out of range: eps0 = {}, r0 = {}, tau = {}", s.eps0, s.r0, s.tau));
        }
        let n = &self.numerics;
        if n.quality < 2 || n.working_box == 0 || !(n.max_deriv > 0.0) || !(n.target > 0.0) {
            return bad("numerics out of range: need quality >= 2, working_box >= 1, max_deriv > 0, target > 0".into());
        }
        match &self.perturbation {
            PerturbationSource::File { path } => {
                let p = base_dir.join(path);
                if !p.is_file() {
                    return bad(format!("perturbation file {} does not exist", p.display()));
                }
            }
            PerturbationSource::Synthesized { terms } => {
                for t in terms {
                    if t.k.len() != self.dimension || t.component >= self.dimension {
                        return bad(format!("term {:?} does not fit dimension {}", t.k, self.dimension));
                    }
                }
            }
            PerturbationSource::Random { amplitude, decay, .. } => {
                if !(*amplitude >= 0.0) || !(*decay >= 0.0) {
                    return bad("random perturbation needs amplitude >= 0 and decay >= 0".into());
                }
            }
        }
        Ok(Scenario {
            config: self,
            base_dir: base_dir.to_path_buf(),
            presentation,
            action,
        })
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let cfg = ScenarioConfig::load(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate(&base)
    }

    pub fn output_dir(&self, overridden: Option<&Path>) -> PathBuf {
        overridden
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(&self.config.output))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_entries() {
        let (x, q) = parse_rotation_entry("1/3").unwrap();
        assert_eq!(q, Some(Rational64::new(1, 3)));
        assert!((x - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(parse_rotation_entry("0").unwrap().1, Some(Rational64::new(0, 1)));
        let (x, q) = parse_rotation_entry("0.61803398874989484820").unwrap();
        assert!(q.is_none());
        assert_eq!(x, 0.6180339887498949);
        assert!(parse_rotation_entry("1/0").is_err());
        assert!(parse_rotation_entry("abc").is_err());
        assert!(parse_rotation_entry("inf").is_err());
    }
}
