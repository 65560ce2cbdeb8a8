//! The four verbs. Each returns an [`Outcome`] whose code is the process
//! exit status: 0 converged, 2 stalled or gate violation, 3 resonance,
//! 1 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use torus_kam::cochain::{diophantine_from_rows, shells, DiophantineFit, DolgopyatFit};
use torus_kam::field::FieldRecord;
use torus_kam::kam::{ScheduleRow, SmallnessGate, StepRecord};
use torus_kam::{BoxOperator, Cochain, Convention, FourierField, HarmonicMode, KamConfig, KamEngine, RunStatus};

use crate::config::{ConventionName, Scenario, ScenarioConfig};
use crate::perturb::{self, PerturbationFile};
use crate::report;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

/// Command-line overrides of scenario fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_steps: Option<usize>,
    pub k_max: Option<f64>,
    pub tau: Option<f64>,
    pub convention: Option<ConventionName>,
}

pub fn load(path: &Path, o: &Overrides) -> Result<Scenario, CliError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(m) = o.max_steps {
        cfg.schedule.max_steps = m;
    }
    if let Some(k) = o.k_max {
        cfg.spectrum.k_max = k;
    }
    if let Some(t) = o.tau {
        cfg.spectrum.tau = t;
    }
    if let Some(c) = o.convention {
        cfg.spectrum.convention = c;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate(&base)
}

fn out_dir(s: &Scenario, o: &Overrides) -> Result<PathBuf, CliError> {
    let dir = s.output_dir(o.out.as_deref());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn status_code(s: RunStatus) -> i32 {
    match s {
        RunStatus::Converged => 0,
        RunStatus::Stalled | RunStatus::GateViolation => 2,
        RunStatus::Resonance => 3,
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub reason: Option<String>,
    pub resonance_mode: Option<Vec<i64>>,
    pub iterations: usize,
    pub initial_norm: f64,
    pub initial_relator_residual: f64,
    /// `‖𝒫‖_{S, r₀/2}` of the last iterate against the target.
    pub final_norm: f64,
    pub target: f64,
    pub residuals: Vec<f64>,
    pub conjugacy_norm: f64,
    pub conjugacy_target: f64,
    /// `sup_majorant(W - y, 0)` with mode 0 removed, when `y` is known.
    pub truth_error: Option<f64>,
    pub counterterm_norm: f64,
    pub smallness_gate: SmallnessGate,
    pub steps: Vec<StepRecord>,
    pub schedule: Vec<ScheduleRow>,
    pub conjugacy: FieldRecord,
    pub counterterm: Vec<FieldRecord>,
    pub config: ScenarioConfig,
}

pub fn run(path: &Path, o: &Overrides) -> Result<Outcome, CliError> {
    let s = load(path, o)?;
    let dir = out_dir(&s, o)?;
    let start = Instant::now();
    let pert = perturb::build(&s)?;
    let kam = s.config.kam_config();
    let engine = KamEngine::new(&s.presentation, &s.action, kam)?;
    let res = engine.run(&pert.cochain)?;
    let code = status_code(res.status);
    info!(
        "{}: {} after {} steps, ‖P‖ = {:.3e} in {:.2} s",
        s.config.name,
        res.status.as_str(),
        res.iterations,
        res.final_norm,
        start.elapsed().as_secs_f64()
    );

    let truth_error = pert.truth.as_ref().and_then(|y| {
        let diff = res.conjugacy.without_mean().sub(&y.without_mean()).ok()?;
        Some(diff.sup_majorant(0.0))
    });
    let schedule = (0..=res.iterations.min(res.schedule.max_steps()))
        .filter_map(|m| res.schedule.row(m).copied())
        .collect();
    let rep = RunReport {
        scenario: s.config.name.clone(),
        status: res.status,
        exit_code: code,
        reason: res.reason.clone(),
        resonance_mode: res.resonance_mode.clone(),
        iterations: res.iterations,
        initial_norm: pert.cochain.norm(kam.r0),
        initial_relator_residual: pert.residuals.max(),
        final_norm: res.final_norm,
        target: kam.target,
        residuals: res.residuals.clone(),
        conjugacy_norm: res.conjugacy_norm,
        conjugacy_target: res.conjugacy_target,
        truth_error,
        counterterm_norm: res.counterterm.norm(0.0),
        smallness_gate: res.smallness_gate,
        steps: res.trace.clone(),
        schedule,
        conjugacy: FieldRecord::from(&res.conjugacy),
        counterterm: res.counterterm.components().iter().map(FieldRecord::from).collect(),
        config: s.config.clone(),
    };
    report::write_csv(&dir.join("trace.csv"), &report::trace_rows(&res))?;
    report::write_json(&dir.join("result.json"), &rep)?;
    let mut decay: Vec<(String, &FourierField)> = vec![("conjugacy".into(), &res.conjugacy)];
    for (l, f) in pert.cochain.components().iter().enumerate() {
        decay.push((format!("initial_{}", l + 1), f));
    }
    for (l, f) in res.final_perturbation.components().iter().enumerate() {
        decay.push((format!("final_{}", l + 1), f));
    }
    report::write_decay(&dir.join("decay.csv"), &decay)?;

    let mut summary = format!(
        "{}: {} after {} steps, final norm {:.3e}, max residual {:.3e}",
        s.config.name,
        res.status.as_str(),
        res.iterations,
        res.final_norm,
        res.residuals.iter().copied().fold(0.0, f64::max)
    );
    if let Some(k) = &res.resonance_mode {
        summary.push_str(&format!(", resonant mode k = {k:?}"));
    }
    Ok(Outcome { code, summary })
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub scenario: String,
    pub convention: ConventionName,
    pub tau: f64,
    pub k_max: f64,
    pub modes_scanned: usize,
    pub diophantine: Option<DiophantineFit>,
    pub diophantine_error: Option<String>,
    pub dolgopyat: DolgopyatFit,
    /// Canonical modes with a nontrivial kernel.
    pub kernel_modes: Vec<Vec<i64>>,
    pub resonant_modes: Vec<Vec<i64>>,
}

pub fn spectrum(path: &Path, o: &Overrides) -> Result<Outcome, CliError> {
    let s = load(path, o)?;
    let sp = s.config.spectrum;
    if !(sp.k_max >= 1.0) || !sp.k_max.is_finite() {
        return Err(CliError::Config(format!("K_max must be at least 1, got {}", sp.k_max)));
    }
    if !(sp.tau >= 0.0) || !sp.tau.is_finite() {
        return Err(CliError::Config(format!("tau must be nonnegative, got {}", sp.tau)));
    }
    let dir = out_dir(&s, o)?;
    let conv: Convention = sp.convention.into();
    let op = BoxOperator::new(&s.presentation, &s.action, conv)?
        .with_resonance_floor(s.config.numerics.resonance_floor);
    let rows = op.spectrum(sp.k_max);
    let (diophantine, diophantine_error) = match diophantine_from_rows(&rows, sp.tau, sp.k_max) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let dolgopyat = op.dolgopyat_check(sp.tau, sp.k_max)?;
    info!(
        "{}: {} modes, σ = {:?}, C = {:.6e}",
        s.config.name,
        rows.len(),
        diophantine.as_ref().map(|f| f.sigma),
        dolgopyat.c
    );
    report::write_spectrum(&dir.join("spectrum.csv"), s.config.dimension, &rows)?;
    report::write_shells(&dir.join("shells.csv"), &shells(&rows))?;
    let fit = FitReport {
        scenario: s.config.name.clone(),
        convention: sp.convention,
        tau: sp.tau,
        k_max: sp.k_max,
        modes_scanned: rows.len(),
        diophantine: diophantine.clone(),
        diophantine_error,
        dolgopyat: dolgopyat.clone(),
        kernel_modes: rows.iter().filter(|r| r.kernel_dim > 0).map(|r| r.k.clone()).collect(),
        resonant_modes: rows.iter().filter(|r| r.resonant).map(|r| r.k.clone()).collect(),
    };
    report::write_json(&dir.join("fit.json"), &fit)?;
    let sigma = match &diophantine {
        Some(f) => format!("σ = {:.6e} at k = {:?}", f.sigma, f.argmin),
        None => "σ undefined (trivial action)".into(),
    };
    Ok(Outcome {
        code: 0,
        summary: format!(
            "{}: {} modes scanned, {sigma}, C = {:.6e}",
            s.config.name,
            rows.len(),
            dolgopyat.c
        ),
    })
}

pub fn synthesize(path: &Path, o: &Overrides) -> Result<Outcome, CliError> {
    let s = load(path, o)?;
    let dir = out_dir(&s, o)?;
    let pert = perturb::build(&s)?;
    let file: PerturbationFile = perturb::to_file(&s, &pert);
    report::write_json(&dir.join("perturbation.json"), &file)?;
    Ok(Outcome {
        code: 0,
        summary: format!(
            "{}: ‖P₀‖_(S,r₀) = {:.6e}, relator residual {:.3e}, written to {}",
            s.config.name,
            pert.cochain.norm(s.config.schedule.r0),
            pert.residuals.max(),
            dir.join("perturbation.json").display()
        ),
    })
}

/// Quick end-to-end checks on built-in data; prints one line per check.
pub fn selftest() -> Result<Outcome, CliError> {
    use num_rational::Rational64;
    use torus_kam::{Moser, Presentation, RotationAction, RotationVector};

    let mut lines = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        lines.push(format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
    };

    let p = Presentation::new(1, &[])?;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let a = RotationAction::from_f64(&p, vec![vec![g]])?;
    let cfg = KamConfig {
        eps0: 0.05,
        harmonic_mode: HarmonicMode::Verify,
        ..KamConfig::default()
    };
    let y = FourierField::from_trig_terms(1, &[(vec![1], 0, 0.0, 1e-3)])?;
    let pert = Moser::new(cfg.gates, cfg.grid).synthesize_action(&p, &a, &y)?;
    let res = KamEngine::new(&p, &a, cfg)?.run(&pert)?;
    check(
        "circle conjugacy",
        res.status == RunStatus::Converged,
        format!("{} in {} steps, ‖P‖ = {:.2e}", res.status.as_str(), res.iterations, res.final_norm),
    );

    let third = RotationAction::from_generators(&p, vec![RotationVector::from_rational(vec![Rational64::new(1, 3)])])?;
    let op = BoxOperator::new(&p, &third, Convention::InverseConvention)?;
    let ker: Vec<i64> = op.spectrum(9.0).iter().filter(|r| r.kernel_dim > 0).map(|r| r.k[0]).collect();
    check("rational kernels", ker == vec![3, 6, 9], format!("kernel at k = {ker:?}"));

    let z2 = Presentation::free_abelian(2)?;
    let pair = RotationAction::from_f64(&z2, vec![vec![g, 2f64.sqrt() - 1.0], vec![3f64.sqrt() - 1.0, 0.3]])?;
    let op = BoxOperator::new(&z2, &pair, Convention::AllLetters)?;
    let v = FourierField::from_trig_terms(2, &[(vec![1, 2], 0, 0.3, 0.1), (vec![0, 1], 1, 0.2, 0.0)])?;
    let dd = op.d1(&op.d0(&v)?)?.norm(0.0);
    check("d1 d0 = 0", dd <= 1e-13, format!("‖d1 d0 v‖ = {dd:.2e}"));
    let zero = KamEngine::new(&z2, &pair, KamConfig::default())?.run(&Cochain::zero(4, 2))?;
    check(
        "zero perturbation",
        zero.status == RunStatus::Converged && zero.iterations == 0,
        format!("{} in {} steps", zero.status.as_str(), zero.iterations),
    );

    for l in &lines {
        println!("{l}");
    }
    Ok(Outcome {
        code: if ok { 0 } else { 2 },
        summary: format!("selftest: {}", if ok { "all checks passed" } else { "failures" }),
    })
}
