use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::schedule::{radius, Schedule, SmallnessGate};
use crate::cochain::{BoxOperator, Cochain, Convention};
use crate::error::{KamError, Result};
use crate::field::{Evaluator, FourierField, GridConfig};
use crate::moser::{
    check_points, conjugated_displacement, relator_residuals, torus_norm, Moser, MoserGates, PerturbedGenerator,
};
use crate::par;
use crate::presentation::{Letter, Presentation, RotationAction};

/// How the harmonic part `ℋ𝒫_m` is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarmonicMode {
    /// Inputs are conjugate by construction; assert `‖ℋ𝒫_{m+1}‖ ≤ ε_m^{5/4}`.
    Verify,
    /// Halt when `‖ℋ𝒫_m‖ > safety·ε_m^{5/4}`.
    #[default]
    Obstruct,
    /// Drop `ℋ𝒫_m` before each step and report the accumulated counterterm.
    Counterterm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    Stalled,
    Resonance,
    GateViolation,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::Stalled => "stalled",
            RunStatus::Resonance => "resonance",
            RunStatus::GateViolation => "gate-violation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KamConfig {
    pub eps0: f64,
    pub r0: f64,
    pub zeta0: f64,
    pub tau: f64,
    pub max_steps: usize,
    /// Stop once `‖𝒫_m‖_{S, r₀/2}` falls below this.
    pub target: f64,
    pub harmonic_mode: HarmonicMode,
    pub safety: f64,
    pub gates: MoserGates,
    pub grid: GridConfig,
    pub resonance_floor: f64,
    /// Seed for the random verification points.
    pub seed: u64,
}

impl Default for KamConfig {
    fn default() -> Self {
        Self {
            eps0: 1e-3,
            r0: 0.5,
            zeta0: 0.0,
            tau: 2.0,
            max_steps: 12,
            target: 1e-12,
            harmonic_mode: HarmonicMode::default(),
            safety: 1.0,
            gates: MoserGates::default(),
            grid: GridConfig::default(),
            resonance_floor: 1e-300,
            seed: 0,
        }
    }
}

/// The iterate between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct KamState {
    pub m: usize,
    /// One perturbation per letter of `S`.
    pub perturbation: Cochain,
    /// Accumulated conjugacy `W_m`.
    pub conjugacy: FourierField,
    pub counterterm: Cochain,
}

/// Diagnostics of one step `m → m+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub m: usize,
    pub r: f64,
    pub r_next: f64,
    pub n_trunc: f64,
    pub eps: f64,
    pub eps_next: f64,
    /// `‖𝒫_m‖_{S, r_m}`.
    pub p_norm: f64,
    /// `‖𝒫_{m+1}‖_{S, r_{m+1}}`.
    pub p_next_norm: f64,
    /// `‖𝒫_{m+1}‖_{S, r₀/2}`.
    pub p_next_final: f64,
    /// `‖w_m‖_{r_m}` and its ratio to `N_m^τ ε_m`.
    pub w_norm: f64,
    pub w_ratio: f64,
    /// `‖ℋ𝒫_m‖_{L²}` and `‖ℋ𝒫_{m+1}‖_{L²}` against `ε_m^{5/4}`.
    pub harmonic_norm: f64,
    pub harmonic_next: f64,
    pub harmonic_target: f64,
    /// `‖Π⊥_{N_m}𝒫_m‖_{S, r'_m}` against `ε_m²`.
    pub tail_norm: f64,
    pub tail_target: f64,
    pub inverse_gain: f64,
    pub solve_residual: f64,
    /// `sup_l |(P - d0 w) - (P' + R1 - R2)|` with the `R` terms from `s1`.
    pub cohomo_defect: f64,
    /// `‖d1^* d1 F_m‖_{r_m}` against `N_m^τ ε_m^{3/2}`.
    pub d1d1_norm: f64,
    pub d1d1_scale: f64,
    /// Relator and inverse-pair composites of the conjugated action.
    pub relator_residual: f64,
    /// `‖W_{m+1} - W_m‖_{r_{m+2}}` against `ε_{m+1}^{3/4}`.
    pub increment_norm: f64,
    pub increment_target: f64,
    /// `ln‖𝒫_{m+1}‖ / ln‖𝒫_m‖` with both norms at their schedule radii.
    pub contraction: f64,
    /// `ℓ¹` mass dropped by grid re-expansions during the step.
    pub grid_tail: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct ConjugacyResult {
    pub status: RunStatus,
    pub reason: Option<String>,
    pub resonance_mode: Option<Vec<i64>>,
    pub conjugacy: FourierField,
    pub final_perturbation: Cochain,
    /// Per-letter `sup |Exp{W}⁻¹∘π₀(γ)∘Exp{W}(x) - (x + α_γ)|`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<StepRecord>,
    pub counterterm: Cochain,
    /// `‖𝒫‖_{S, r₀/2}` of the last iterate.
    pub final_norm: f64,
    /// `‖W‖_{r₀/2}` against `ε₀^{3/4}`.
    pub conjugacy_norm: f64,
    pub conjugacy_target: f64,
    pub smallness_gate: SmallnessGate,
    pub schedule: Schedule,
}

/// Result of one call to [`KamEngine::step`].
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Advanced(KamState, Box<StepRecord>),
    Halted {
        status: RunStatus,
        reason: String,
        resonance_mode: Option<Vec<i64>>,
        record: Option<Box<StepRecord>>,
    },
}

fn halt_on(e: KamError) -> Result<StepOutcome> {
    match e {
        KamError::Resonance { ref mode, .. } => Ok(StepOutcome::Halted {
            status: RunStatus::Resonance,
            reason: e.to_string(),
            resonance_mode: Some(mode.clone()),
            record: None,
        }),
        KamError::DisplacementTooLarge { .. } | KamError::NonContraction { .. } | KamError::GridTooSmall { .. } => {
            Ok(StepOutcome::Halted {
                status: RunStatus::GateViolation,
                reason: e.to_string(),
                resonance_mode: None,
                record: None,
            })
        }
        other => Err(other),
    }
}

macro_rules! try_step {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return halt_on(e),
        }
    };
}

/// Per-run context: the unperturbed action, its box operator and the
/// schedule.
#[derive(Debug)]
pub struct KamEngine {
    presentation: Presentation,
    action: RotationAction,
    op: BoxOperator,
    moser: Moser,
    config: KamConfig,
    schedule: Schedule,
    points: Vec<Vec<f64>>,
}

impl KamEngine {
    pub fn new(presentation: &Presentation, action: &RotationAction, config: KamConfig) -> Result<Self> {
        let schedule = Schedule::new(config.eps0, config.r0, config.zeta0, config.max_steps)?;
        let op = BoxOperator::new(presentation, action, Convention::AllLetters)?
            .with_resonance_floor(config.resonance_floor);
        Ok(Self {
            presentation: presentation.clone(),
            action: action.clone(),
            op,
            moser: Moser::new(config.gates, config.grid),
            config,
            schedule,
            points: check_points(action.dim(), config.seed),
        })
    }

    pub fn operator(&self) -> &BoxOperator {
        &self.op
    }

    pub fn moser(&self) -> &Moser {
        &self.moser
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn config(&self) -> &KamConfig {
        &self.config
    }

    pub fn initial_state(&self, p0: &Cochain) -> Result<KamState> {
        let n = self.presentation.num_letters();
        if p0.len() != n {
            return Err(KamError::DimensionMismatch {
                expected: n,
                found: p0.len(),
            });
        }
        if let Some(d) = p0.dim() {
            if d != self.action.dim() {
                return Err(KamError::DimensionMismatch {
                    expected: self.action.dim(),
                    found: d,
                });
            }
        }
        if p0.half_width() > self.config.grid.working_box {
            return Err(KamError::InvalidParameter(format!(
                "perturbation half-width {} exceeds the working box {}",
                p0.half_width(),
                self.config.grid.working_box
            )));
        }
        let d = self.action.dim();
        Ok(KamState {
            m: 0,
            perturbation: p0.clone(),
            conjugacy: FourierField::zero(d),
            counterterm: Cochain::zero(n, d),
        })
    }

    /// One KAM step: solve the truncated linearized equation, conjugate every
    /// letter by `Exp{w_m}` and check the step targets.
    pub fn step(&self, state: &KamState) -> Result<StepOutcome> {
        let start = Instant::now();
        let m = state.m;
        let (row, next) = match (self.schedule.row(m), self.schedule.row(m + 1)) {
            (Some(a), Some(b)) => (*a, *b),
            _ => {
                return Ok(StepOutcome::Halted {
                    status: RunStatus::Stalled,
                    reason: format!("schedule exhausted at step {m}"),
                    resonance_mode: None,
                    record: None,
                })
            }
        };
        let cfg = &self.config;
        let p_norm = state.perturbation.norm(row.r);
        if p_norm >= row.eps {
            return Ok(StepOutcome::Halted {
                status: RunStatus::Stalled,
                reason: format!("step {m}: ‖P_m‖ = {p_norm:.3e} is not below ε_m = {:.3e}", row.eps),
                resonance_mode: None,
                record: None,
            });
        }

        // Resonances take precedence over the harmonic policy: a resonant
        // mode makes the harmonic split itself meaningless.
        if let Some(k) = self
            .op
            .resonant_modes(state.perturbation.half_width(), row.n_trunc)
            .into_iter()
            .next()
        {
            let mu_min = self.op.block(&k).mu_min;
            return halt_on(KamError::Resonance { mode: k, mu_min });
        }

        let split = self.op.harmonic_project(&state.perturbation)?;
        let harmonic_norm = split.harmonic.norm(0.0);
        let harmonic_target = row.eps.powf(1.25);
        let mut counterterm = state.counterterm.clone();
        let p = match cfg.harmonic_mode {
            HarmonicMode::Obstruct if harmonic_norm > cfg.safety * harmonic_target => {
                return Ok(StepOutcome::Halted {
                    status: RunStatus::Stalled,
                    reason: format!(
                        "step {m}: harmonic obstruction ‖ℋP_m‖ = {harmonic_norm:.3e} exceeds {:.3e}",
                        cfg.safety * harmonic_target
                    ),
                    resonance_mode: None,
                    record: None,
                });
            }
            HarmonicMode::Counterterm => {
                counterterm = counterterm.add(&split.harmonic)?;
                split.complement.clone()
            }
            _ => state.perturbation.clone(),
        };

        let tail_norm = p.truncate_tail(row.n_trunc).norm(row.r_prime);
        let tail_target = row.eps * row.eps;
        if tail_norm >= tail_target {
            warn!("step {m}: truncation tail {tail_norm:.3e} not below ε_m² = {tail_target:.3e}");
        }

        let sol = try_step!(self.op.solve_cohomological(&p, row.n_trunc));
        let w = self.op.d0_star(&sol.solution)?;
        let w_norm = w.weighted_norm(row.r);
        let w_ratio = w_norm / (row.n_trunc.powf(cfg.tau) * row.eps);
        try_step!(cfg.gates.check(&w));

        let letters: Vec<Letter> = self.presentation.letters().collect();
        let conj = par::map_slice(&letters, |&l| {
            let g = PerturbedGenerator::new(l, self.action.alpha(l).clone(), p.get(l.0).clone());
            self.moser.conjugate_generator(&g, &w)
        });
        let mut comps = Vec::with_capacity(letters.len());
        let mut grid_tail = 0.0;
        for c in conj {
            let g = try_step!(c);
            grid_tail += g.error;
            comps.push(g.perturbation);
        }
        let p_next = Cochain::new(comps)?;
        let p_next_norm = p_next.norm(row.r_next);
        let p_next_final = p_next.norm(self.schedule.r_limit());

        let acc = try_step!(self.moser.accumulate(&state.conjugacy, &w));
        grid_tail += acc.tail_majorant;
        let increment_norm = acc.field.sub(&state.conjugacy)?.weighted_norm(radius(cfg.r0, m + 2));
        let increment_target = next.eps.powf(0.75);

        let cohomo_defect = self.cohomo_defect(&p, &p_next, &w).unwrap_or_else(|e| {
            warn!("step {m}: cohomological audit skipped: {e}");
            f64::NAN
        });
        let d1d1_norm = self.op.d1_star(&self.op.d1(&sol.solution)?)?.norm(row.r);
        let d1d1_scale = row.n_trunc.powf(cfg.tau) * row.eps.powf(1.5);
        let harmonic_next = self.op.harmonic_project(&p_next)?.harmonic.norm(0.0);
        let relator_residual = relator_residuals(&self.presentation, &self.action, &p_next, &self.points)?.max();
        let contraction = p_next_norm.ln() / p_norm.ln();

        let record = StepRecord {
            m,
            r: row.r,
            r_next: row.r_next,
            n_trunc: row.n_trunc,
            eps: row.eps,
            eps_next: next.eps,
            p_norm,
            p_next_norm,
            p_next_final,
            w_norm,
            w_ratio,
            harmonic_norm,
            harmonic_next,
            harmonic_target,
            tail_norm,
            tail_target,
            inverse_gain: sol.inverse_gain,
            solve_residual: sol.residual,
            cohomo_defect,
            d1d1_norm,
            d1d1_scale,
            relator_residual,
            increment_norm,
            increment_target,
            contraction,
            grid_tail,
            wall_time: start.elapsed().as_secs_f64(),
        };
        debug!("{record:?}");
        info!(
            "step {m}: |P_m| = {p_norm:.3e}, |P_m+1| = {p_next_norm:.3e} (target {:.3e}), |w| = {w_norm:.3e}, exponent {contraction:.3}",
            next.eps
        );

        if cfg.harmonic_mode == HarmonicMode::Verify && harmonic_next > harmonic_target {
            return Ok(StepOutcome::Halted {
                status: RunStatus::Stalled,
                reason: format!(
                    "step {m}: harmonic part {harmonic_next:.3e} of P_m+1 exceeds ε_m^(5/4) = {harmonic_target:.3e}"
                ),
                resonance_mode: None,
                record: Some(Box::new(record)),
            });
        }
        if p_next_norm >= next.eps {
            return Ok(StepOutcome::Halted {
                status: RunStatus::Stalled,
                reason: format!(
                    "step {m}: ‖P_m+1‖ = {p_next_norm:.3e} is not below ε_m+1 = {:.3e}",
                    next.eps
                ),
                resonance_mode: None,
                record: Some(Box::new(record)),
            });
        }
        Ok(StepOutcome::Advanced(
            KamState {
                m: m + 1,
                perturbation: p_next,
                conjugacy: acc.field,
                counterterm,
            },
            Box::new(record),
        ))
    }

    /// `sup_l ‖(P_l - d0 w) - (P'_l + s1(w, P'_l) - s1(P_l, π(γ_l)_* w))‖`
    /// as a majorant at `r = 0`.
    fn cohomo_defect(&self, p: &Cochain, p_next: &Cochain, w: &FourierField) -> Result<f64> {
        let d0w = self.op.d0(w)?;
        let mut worst = 0.0f64;
        for l in self.presentation.letters() {
            let moved = w.pushforward_rotation(self.action.alpha(l))?;
            let r1 = self.moser.s1(w, p_next.get(l.0))?.field;
            let r2 = self.moser.s1(p.get(l.0), &moved)?.field;
            let lhs = p.get(l.0).sub(d0w.get(l.0))?;
            let rhs = p_next.get(l.0).add(&r1)?.sub(&r2)?;
            worst = worst.max(lhs.sub(&rhs)?.sup_majorant(0.0));
        }
        Ok(worst)
    }

    /// Per-letter residual of `Exp{W}⁻¹∘π₀(γ)∘Exp{W}` against `π(γ)` on the
    /// `10^d` grid and 100 random points.
    pub fn verify_conjugacy(&self, w: &FourierField, perturbations: &Cochain) -> Result<Vec<f64>> {
        verify_conjugacy(w, perturbations, &self.presentation, &self.action, &self.points)
    }

    pub fn run(&self, p0: &Cochain) -> Result<ConjugacyResult> {
        let mut state = self.initial_state(p0)?;
        let mut trace = Vec::new();
        let r_lim = self.schedule.r_limit();
        let mut status = None;
        let mut reason = None;
        let mut resonance_mode = None;
        loop {
            if state.perturbation.norm(r_lim) < self.config.target {
                status = Some(RunStatus::Converged);
                break;
            }
            if state.m >= self.config.max_steps {
                break;
            }
            match self.step(&state)? {
                StepOutcome::Advanced(next, rec) => {
                    trace.push(*rec);
                    state = next;
                }
                StepOutcome::Halted {
                    status: s,
                    reason: why,
                    resonance_mode: mode,
                    record,
                } => {
                    if let Some(rec) = record {
                        trace.push(*rec);
                    }
                    warn!("{why}");
                    status = Some(s);
                    reason = Some(why);
                    resonance_mode = mode;
                    break;
                }
            }
        }
        let final_norm = state.perturbation.norm(r_lim);
        let mut status = status.unwrap_or_else(|| {
            reason = Some(format!(
                "no convergence after {} steps: ‖P‖ = {final_norm:.3e}",
                self.config.max_steps
            ));
            RunStatus::Stalled
        });
        let residuals = match self.verify_conjugacy(&state.conjugacy, p0) {
            Ok(r) => r,
            Err(e) => {
                warn!("verification failed: {e}");
                vec![f64::NAN; self.presentation.num_letters()]
            }
        };
        if status == RunStatus::Converged && self.config.harmonic_mode != HarmonicMode::Counterterm {
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            if !(worst <= self.config.target) {
                status = RunStatus::Stalled;
                reason = Some(format!(
                    "conjugacy check failed: residual {worst:.3e} above target {:.3e}",
                    self.config.target
                ));
            }
        }
        let conjugacy_norm = state.conjugacy.weighted_norm(r_lim);
        let conjugacy_target = self.config.eps0.powf(0.75);
        if conjugacy_norm >= conjugacy_target {
            warn!("‖W‖ = {conjugacy_norm:.3e} not below ε₀^(3/4) = {conjugacy_target:.3e}");
        }
        Ok(ConjugacyResult {
            status,
            reason,
            resonance_mode,
            iterations: state.m,
            conjugacy: state.conjugacy,
            final_perturbation: state.perturbation,
            residuals,
            trace,
            counterterm: state.counterterm,
            final_norm,
            conjugacy_norm,
            conjugacy_target,
            smallness_gate: self.schedule.smallness_gate(self.config.tau, self.action.dim()),
            schedule: self.schedule.clone(),
        })
    }
}

/// Per-letter residuals of the conjugacy `W` between `π₀ = Exp{P}∘π` and `π`.
pub fn verify_conjugacy(
    w: &FourierField,
    perturbations: &Cochain,
    presentation: &Presentation,
    action: &RotationAction,
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if perturbations.len() != presentation.num_letters() {
        return Err(KamError::DimensionMismatch {
            expected: presentation.num_letters(),
            found: perturbations.len(),
        });
    }
    let d = action.dim();
    let ew = Evaluator::new(w);
    presentation
        .letters()
        .map(|l| {
            let ep = Evaluator::new(perturbations.get(l.0));
            let alpha = action.alpha(l).as_slice();
            let errs = par::map_slice(points, |x| -> Result<f64> {
                let mut out = vec![0.0; d];
                conjugated_displacement(&ew, &ep, alpha, x, &mut out)?;
                Ok(torus_norm(&out))
            });
            let mut worst = 0.0f64;
            for e in errs {
                worst = worst.max(e?);
            }
            Ok(worst)
        })
        .collect()
}
