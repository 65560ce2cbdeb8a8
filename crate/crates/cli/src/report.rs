//! CSV and JSON artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;
use torus_kam::cochain::{ShellRow, SpectrumRow};
use torus_kam::field::decay_rows;
use torus_kam::kam::StepRecord;
use torus_kam::{ConjugacyResult, FourierField};

use crate::CliError;

/// One row per iterate `m`. The step columns describe `m → m+1` and are
/// empty on the last row.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub m: usize,
    pub r: f64,
    pub eps: f64,
    pub p_norm: f64,
    pub n_trunc: Option<f64>,
    pub w_norm: Option<f64>,
    pub harmonic_norm: Option<f64>,
    pub harmonic_target: Option<f64>,
    pub tail_norm: Option<f64>,
    pub tail_target: Option<f64>,
    pub inverse_gain: Option<f64>,
    pub cohomo_defect: Option<f64>,
    pub d1d1_norm: Option<f64>,
    pub relator_residual: Option<f64>,
    pub contraction: Option<f64>,
    pub wall_time: Option<f64>,
}

impl TraceRow {
    fn from_step(s: &StepRecord) -> Self {
        Self {
            m: s.m,
            r: s.r,
            eps: s.eps,
            p_norm: s.p_norm,
            n_trunc: Some(s.n_trunc),
            w_norm: Some(s.w_norm),
            harmonic_norm: Some(s.harmonic_norm),
            harmonic_target: Some(s.harmonic_target),
            tail_norm: Some(s.tail_norm),
            tail_target: Some(s.tail_target),
            inverse_gain: Some(s.inverse_gain),
            cohomo_defect: Some(s.cohomo_defect),
            d1d1_norm: Some(s.d1d1_norm),
            relator_residual: Some(s.relator_residual),
            contraction: Some(s.contraction),
            wall_time: Some(s.wall_time),
        }
    }
}

/// Trace rows for a run: every completed step plus the final iterate.
pub fn trace_rows(res: &ConjugacyResult) -> Vec<TraceRow> {
    let mut rows: Vec<TraceRow> = res.trace.iter().map(TraceRow::from_step).collect();
    let m = res.iterations;
    if rows.len() == m {
        if let Some(row) = res.schedule.row(m) {
            rows.push(TraceRow {
                m,
                r: row.r,
                eps: row.eps,
                p_norm: res.final_perturbation.norm(row.r),
                n_trunc: None,
                w_norm: None,
                harmonic_norm: None,
                harmonic_target: None,
                tail_norm: None,
                tail_target: None,
                inverse_gain: None,
                cohomo_defect: None,
                d1d1_norm: None,
                relator_residual: None,
                contraction: None,
                wall_time: None,
            });
        }
    }
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DecayRow {
    field: String,
    norm_k: f64,
    lambda: f64,
    magnitude: f64,
}

/// `(|k|, |c_k|)` tables of named fields in one CSV.
pub fn write_decay(path: &Path, fields: &[(String, &FourierField)]) -> Result<(), CliError> {
    let rows: Vec<DecayRow> = fields
        .iter()
        .flat_map(|(name, f)| {
            decay_rows(f).into_iter().map(move |(norm_k, lambda, magnitude)| DecayRow {
                field: name.clone(),
                norm_k,
                lambda,
                magnitude,
            })
        })
        .collect();
    write_csv(path, &rows)
}

pub fn write_spectrum(path: &Path, dim: usize, rows: &[SpectrumRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("k{i}")).collect();
    header.extend(["norm_k", "lambda", "mu_min", "kernel_dim", "resonant"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.k.iter().map(|x| x.to_string()).collect();
        rec.push((r.lambda / (2.0 * std::f64::consts::PI)).to_string());
        rec.push(r.lambda.to_string());
        rec.push(r.mu_min.to_string());
        rec.push(r.kernel_dim.to_string());
        rec.push(r.resonant.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_shells(path: &Path, rows: &[ShellRow]) -> Result<(), CliError> {
    write_csv(path, rows)
}
