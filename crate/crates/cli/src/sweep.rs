//! One-parameter sweeps over a base config.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use glx_core::exec::map_indices;
use glx_core::Complex64;
use serde::Serialize;

use crate::config::{ComplexValue, ForcingKindName, RunConfig};
use crate::pipeline::{execute, load, output_dir, prepare, write_artifacts, write_json};
use crate::{with_workers, Classify, CliError, CliResult, FailureKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Theta,
    M,
    AModulus,
    Mu,
    Dt,
    /// Grid spacing; the half-width is kept.
    H,
    /// Half-width; the spacing is kept as close as the point count allows.
    L,
}

impl FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "theta" => Axis::Theta,
            "m" => Axis::M,
            "a-modulus" => Axis::AModulus,
            "mu" => Axis::Mu,
            "dt" => Axis::Dt,
            "h" => Axis::H,
            "L" | "l" => Axis::L,
            _ => bail!("unknown sweep axis `{s}` (expected theta, m, a-modulus, mu, dt, h or L)"),
        })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Theta => "theta",
            Axis::M => "m",
            Axis::AModulus => "a-modulus",
            Axis::Mu => "mu",
            Axis::Dt => "dt",
            Axis::H => "h",
            Axis::L => "L",
        })
    }
}

fn points_for(half_width: f64, h: f64) -> anyhow::Result<usize> {
    if !(h.is_finite() && h > 0.0 && half_width > 0.0) {
        bail!("spacing and half-width must be positive");
    }
    let n = (2.0 * half_width / h - 1.0).round();
    if n < 1.0 {
        bail!("spacing {h} leaves no interior points on a half-width of {half_width}");
    }
    Ok(n as usize)
}

/// Returns a copy of `cfg` with the axis set to `value`.
pub fn apply(cfg: &RunConfig, axis: Axis, value: f64) -> anyhow::Result<RunConfig> {
    let mut c = cfg.clone();
    match axis {
        Axis::Theta => c.params.theta = value,
        Axis::M => c.params.m = value,
        Axis::AModulus => {
            let a = c.params.a.value();
            let phase = if a == Complex64::new(0.0, 0.0) { Complex64::new(1.0, 0.0) } else { a / a.norm() };
            c.params.a = ComplexValue::from(phase * value);
        }
        Axis::Mu => c.forcing.mu = Some(value),
        Axis::Dt => c.scheme.dt = value,
        Axis::H => c.grid.points = points_for(c.grid.half_width, value)?,
        Axis::L => {
            let h = 2.0 * c.grid.half_width / (c.grid.points as f64 + 1.0);
            c.grid.points = points_for(value, h)?;
            c.grid.half_width = value;
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    /// `ok`, `invalid` or `failed`.
    pub status: &'static str,
    pub message: Option<String>,
    pub t_star_observed: Option<f64>,
    pub t_star_bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub envelope_violation: Option<f64>,
    pub final_mass: Option<f64>,
    pub ledger_max_residual: Option<f64>,
    /// Residual of this row over the residual of the previous row.
    pub residual_ratio: Option<f64>,
    #[serde(skip)]
    exit_code: i32,
}

fn run_one(cfg: &RunConfig, base: &Path, axis: Axis, value: f64, dir: &Path) -> CliResult<crate::pipeline::Report> {
    let cfg = apply(cfg, axis, value).invalid()?;
    let prepared = prepare(&cfg, base)?;
    match execute(&prepared) {
        Ok(outcome) => {
            write_artifacts(dir, &prepared, &outcome).failed()?;
            Ok(outcome.report)
        }
        Err((partial, err)) => {
            if let Some(outcome) = partial {
                let _ = write_artifacts(dir, &prepared, &outcome);
            }
            Err(err)
        }
    }
}

/// Runs the base config once per value, in parallel, and writes
/// `summary.csv` and `summary.json` sorted by value. Individual failures are
/// recorded and do not stop the sweep.
pub fn sweep(
    cfg: &RunConfig,
    base: &Path,
    axis: Axis,
    values: &[f64],
    out: &Path,
    workers: Option<usize>,
) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::validation(anyhow!("sweep needs at least one value")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::validation(anyhow!("sweep value {v} is not finite")));
    }
    if axis == Axis::Mu && cfg.forcing.kind != ForcingKindName::BangBang {
        return Err(CliError::validation(anyhow!("the mu axis needs bang_bang forcing")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .invalid()?;

    let mut rows = with_workers(workers, || {
        map_indices(sorted.len(), |i| {
            let value = sorted[i];
            let dir = out.join(format!("run_{i:03}"));
            let result = run_one(cfg, base, axis, value, &dir);
            let mut row = SweepRow {
                index: i,
                value,
                status: "ok",
                message: None,
                t_star_observed: None,
                t_star_bound: None,
                bound_satisfied: None,
                envelope_violation: None,
                final_mass: None,
                ledger_max_residual: None,
                residual_ratio: None,
                exit_code: 0,
            };
            match result {
                Ok(report) => {
                    row.t_star_observed = report.t_star_observed;
                    row.t_star_bound = report.extinction.as_ref().map(|e| e.t_star_bound);
                    row.bound_satisfied = report.extinction.as_ref().map(|e| e.bound_satisfied);
                    row.envelope_violation = report.extinction.as_ref().map(|e| e.envelope_max_violation);
                    row.final_mass = Some(report.final_mass);
                    row.ledger_max_residual = report.ledger_max_residual;
                }
                Err(e) => {
                    row.status = match e.kind {
                        FailureKind::Validation => "invalid",
                        _ => "failed",
                    };
                    row.message = Some(e.to_string());
                    row.exit_code = e.exit_code();
                }
            }
            row
        })
    })?;
    for i in 1..rows.len() {
        if let (Some(prev), Some(cur)) = (rows[i - 1].ledger_max_residual, rows[i].ledger_max_residual) {
            rows[i].residual_ratio = (prev > 0.0).then(|| cur / prev);
        }
    }
    write_summary(out, axis, &rows).failed()?;
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn write_summary(out: &Path, axis: Axis, rows: &[SweepRow]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(out.join("summary.csv"))?);
    writeln!(
        w,
        "index,{axis},status,t_star_observed,t_star_bound,bound_satisfied,envelope_violation,final_mass,ledger_max_residual,residual_ratio"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{},{},{},{},{},{},{},{}",
            r.index,
            r.value,
            r.status,
            opt(r.t_star_observed),
            opt(r.t_star_bound),
            r.bound_satisfied.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.envelope_violation),
            opt(r.final_mass),
            opt(r.ledger_max_residual),
            opt(r.residual_ratio),
        )?;
    }
    w.flush()?;
    write_json(&out.join("summary.json"), &rows)
}

/// Command entry point. Exits with the worst per-run code once every value
/// has been tried.
pub fn cmd_sweep(
    config_path: &Path,
    axis: Axis,
    values: &[f64],
    out: Option<&Path>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> CliResult<Vec<SweepRow>> {
    let (mut cfg, base) = load(config_path)?;
    if let Some(seed) = seed {
        cfg.output.seed = seed;
    }
    let dir = output_dir(&cfg, &base, out);
    let rows = sweep(&cfg, &base, axis, values, &dir, workers)?;
    let worst = rows.iter().max_by_key(|r| r.exit_code);
    match worst {
        Some(r) if r.exit_code != 0 => {
            let failed = rows.iter().filter(|r| r.exit_code != 0).count();
            let kind = if r.exit_code == 2 { FailureKind::Validation } else { FailureKind::Runtime };
            Err(CliError {
                kind,
                error: anyhow!(
                    "{failed} of {} runs failed; first worst at {axis} = {}: {}",
                    rows.len(),
                    r.value,
                    r.message.as_deref().unwrap_or("")
                ),
            })
        }
        _ => Ok(rows),
    }
}
