//! Single runs: config validation, simulation, diagnostics and artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use glx_core::diagnostics::{
    energy_ledger, exp_decay_check, extinction_report, mass_nonincreasing, max_abs_residual, DecayCheck,
    EnergyLedgerRow, ExtinctionReport,
};
use glx_core::dynamics::{simulate, RunRecord, SchemeConfig};
use glx_core::field::{read_binary, write_binary};
use glx_core::forcing::{check_profile, scheduled_profile, ForcingProfile, ProfileCheck};
use glx_core::gn::{estimate_cgn, GnEstimate};
use glx_core::params::derived_constants;
use glx_core::{
    Complex64, ComplexField, DerivedConstants, ForcingKind, Grid, PhysicalParams, ShapeKind, ShapeSpec, TimeEnvelope,
};
use serde::Serialize;

use crate::config::{EnvelopeName, ForcingKindName, InitialKind, InitialSection, RunConfig};
use crate::{Classify, CliError, CliResult};

/// Relative slack allowed when checking that the mass never increases.
const MONOTONE_TOLERANCE: f64 = 1e-12;

/// A validated run, ready to simulate.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub params: PhysicalParams,
    pub grid: Grid,
    pub scheme: SchemeConfig,
    pub forcing: ForcingProfile,
    pub u0: ComplexField,
    pub constants: Option<DerivedConstants>,
    pub gn: Option<GnEstimate>,
    pub profile_check: ProfileCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub params: PhysicalParams,
    pub grid: Grid,
    pub scheme: SchemeConfig,
    pub forcing: ForcingKind,
    pub profile_check: ProfileCheck,
    pub constants: Option<DerivedConstants>,
    pub gn_estimate: Option<GnEstimate>,
    pub initial_mass: f64,
    pub final_time: f64,
    pub final_mass: f64,
    pub t_star_observed: Option<f64>,
    pub mass_nonincreasing: Option<bool>,
    pub ledger_max_residual: Option<f64>,
    pub extinction: Option<ExtinctionReport>,
    pub exp_decay: Option<DecayCheck>,
    /// Set when the simulation stopped early; the other fields then describe
    /// the partial run.
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub run: RunRecord,
    pub ledger: Option<Vec<EnergyLedgerRow>>,
    pub report: Report,
}

pub fn load(config_path: &Path) -> CliResult<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(config_path).invalid()?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn envelope(cfg: &RunConfig) -> anyhow::Result<TimeEnvelope> {
    let f = &cfg.forcing;
    Ok(match f.envelope {
        EnvelopeName::Constant => TimeEnvelope::Constant,
        EnvelopeName::Exponential => TimeEnvelope::Exponential {
            rate: f.rate.context("exponential envelope needs `rate`")?,
        },
        EnvelopeName::Cosine => TimeEnvelope::Cosine {
            omega: f.omega.context("cosine envelope needs `omega`")?,
        },
    })
}

fn forcing_t0(cfg: &RunConfig) -> anyhow::Result<f64> {
    match cfg.forcing.kind {
        ForcingKindName::Zero | ForcingKindName::Free | ForcingKindName::BangBang => Ok(cfg.forcing.t0.unwrap_or(0.0)),
        kind => cfg.forcing.t0.with_context(|| format!("{kind:?} forcing needs `t0`")),
    }
}

fn initial_field(init: &InitialSection, grid: Grid, base: &Path) -> anyhow::Result<ComplexField> {
    let shape = |kind| ShapeSpec {
        kind,
        center: init.center.clone(),
        width: init.width.clone(),
        amplitude: init.amplitude.value(),
    };
    let u0 = match init.kind {
        InitialKind::Gaussian => shape(ShapeKind::Gaussian).sample(grid)?,
        InitialKind::Bump => shape(ShapeKind::Bump).sample(grid)?,
        InitialKind::File => {
            let rel = init.path.as_ref().context("initial kind `file` needs `path`")?;
            let path = base.join(rel);
            let file = File::open(&path).with_context(|| format!("cannot open initial field {}", path.display()))?;
            let u = read_binary(std::io::BufReader::new(file))?;
            if *u.grid() != grid {
                bail!("initial field grid {:?} does not match the config grid {:?}", u.grid(), grid);
            }
            u
        }
    };
    Ok(u0)
}

fn rescale(u: &ComplexField, mass: f64) -> anyhow::Result<ComplexField> {
    if !(mass.is_finite() && mass >= 0.0) {
        bail!("initial mass must be nonnegative, got {mass}");
    }
    let current = u.mass_l2();
    if current == 0.0 {
        bail!("cannot rescale a zero initial field");
    }
    Ok(u.scaled(Complex64::new(mass / current, 0.0)))
}

fn needs_constants(cfg: &RunConfig, params: &PhysicalParams) -> bool {
    params.m < 1.0 && (cfg.forcing.kind == ForcingKindName::Scheduled || cfg.diagnostics.report)
}

/// Checks a config and builds everything the run needs. Every failure here is
/// a validation failure.
pub fn prepare(cfg: &RunConfig, base: &Path) -> CliResult<Prepared> {
    let params = cfg.physical_params();
    params.validate().map_err(|r| CliError::validation(anyhow!("inadmissible parameters: {r}")))?;
    let grid = cfg.grid().invalid()?;
    let mut scheme = cfg.scheme.clone();
    scheme.validate().invalid()?;
    let t0 = forcing_t0(cfg).invalid()?;
    let env = envelope(cfg).invalid()?;
    let shape = || cfg.forcing.shape_spec().sample(grid);

    let mut forcing = match cfg.forcing.kind {
        ForcingKindName::Zero | ForcingKindName::Scheduled => ForcingProfile::zero(grid),
        ForcingKindName::Free => ForcingProfile::free(shape().invalid()?, env),
        ForcingKindName::Cutoff => ForcingProfile::cutoff(shape().invalid()?, env, t0).invalid()?,
        ForcingKindName::Bounded => ForcingProfile::bounded(shape().invalid()?, env, t0, &params).invalid()?,
        ForcingKindName::BangBang => {
            let mu = cfg.forcing.mu.context("bang_bang forcing needs `mu`").invalid()?;
            ForcingProfile::bang_bang(grid, mu).invalid()?
        }
    };

    let (mut constants, mut gn) = (None, None);
    if needs_constants(cfg, &params) {
        let c_gn = match cfg.diagnostics.c_gn {
            Some(c) => c,
            None => {
                let est = estimate_cgn(params.m, &grid, cfg.diagnostics.gn_family_size, cfg.output.seed).invalid()?;
                let c = est.c_gn;
                gn = Some(est);
                c
            }
        };
        let f_sup = match cfg.forcing.kind {
            ForcingKindName::Bounded => forcing.sup_after(t0),
            _ => 0.0,
        };
        // Free and feedback forcings carry no hypothesis, so their constants
        // describe the unforced problem only.
        constants = Some(derived_constants(&params, c_gn, f_sup, t0).invalid()?);
    }

    let mut max_mass = None;
    if cfg.forcing.kind == ForcingKindName::Scheduled {
        let k = constants.as_ref().context("scheduled forcing needs m < 1").invalid()?;
        let sched = scheduled_profile(&params, k, &shape().invalid()?, cfg.forcing.eps).invalid()?;
        max_mass = Some(sched.max_initial_mass);
        forcing = sched.profile;
    }
    let profile_check = check_profile(&forcing, &params, constants.as_ref());
    if !profile_check.holds {
        return Err(CliError::validation(anyhow!(
            "forcing violates its hypothesis ({}): excess {}",
            profile_check.condition,
            profile_check.max_violation
        )));
    }

    let init = &cfg.initial;
    let mut u0 = initial_field(init, grid, base).invalid()?;
    if init.scale_to_max_mass && init.mass.is_some() {
        return Err(CliError::validation(anyhow!("`mass` and `scale_to_max_mass` are exclusive")));
    }
    if let Some(mass) = init.mass {
        u0 = rescale(&u0, mass).invalid()?;
    }
    if init.scale_to_max_mass {
        let target = max_mass
            .context("`scale_to_max_mass` needs scheduled forcing")
            .invalid()?;
        u0 = rescale(&u0, target).invalid()?;
    }
    if let Some(limit) = max_mass {
        let mass = u0.mass_l2();
        if mass > limit {
            return Err(CliError::validation(anyhow!(
                "initial norm {mass} exceeds {limit}, the largest admitted by the scheduled forcing"
            )));
        }
    }

    if cfg.diagnostics.ledger && forcing.kind() != ForcingKind::Zero {
        scheme.store_fields = true;
    }
    Ok(Prepared {
        config: cfg.clone(),
        params,
        grid,
        scheme,
        forcing,
        u0,
        constants,
        gn,
        profile_check,
    })
}

fn reports_extinction(kind: ForcingKind) -> bool {
    matches!(
        kind,
        ForcingKind::Zero | ForcingKind::Cutoff { .. } | ForcingKind::Bounded { .. } | ForcingKind::Scheduled { .. }
    )
}

fn decay_start(kind: ForcingKind) -> Option<f64> {
    match kind {
        ForcingKind::Zero => Some(0.0),
        ForcingKind::Cutoff { t0 } => Some(t0),
        _ => None,
    }
}

fn diagnose(p: &Prepared, run: RunRecord, failure: Option<String>) -> CliResult<Outcome> {
    let diag = &p.config.diagnostics;
    let kind = p.forcing.kind();
    let ledger = if diag.ledger && run.snapshots.len() >= 3 {
        Some(energy_ledger(&run, &p.params, &p.forcing).failed()?)
    } else {
        None
    };
    let extinction = match &p.constants {
        Some(k) if diag.report && reports_extinction(kind) && run.final_time() >= k.t0 => {
            Some(extinction_report(&run, k, diag.safety_factor).failed()?)
        }
        _ => None,
    };
    let exp_decay = match decay_start(kind) {
        Some(t0) if diag.exp_decay && p.params.m == 1.0 && run.final_time() >= t0 => {
            Some(exp_decay_check(&run, &p.params, t0, diag.decay_tolerance).failed()?)
        }
        _ => None,
    };
    let monotone = (kind == ForcingKind::Zero || matches!(kind, ForcingKind::BangBang { .. }))
        .then(|| mass_nonincreasing(&run, MONOTONE_TOLERANCE));
    let report = Report {
        params: p.params.clone(),
        grid: p.grid,
        scheme: p.scheme.clone(),
        forcing: kind,
        profile_check: p.profile_check.clone(),
        constants: p.constants.clone(),
        gn_estimate: p.gn.clone(),
        initial_mass: p.u0.mass_l2(),
        final_time: run.final_time(),
        final_mass: run.final_field.mass_l2(),
        t_star_observed: run.t_star_observed,
        mass_nonincreasing: monotone,
        ledger_max_residual: ledger.as_deref().map(max_abs_residual),
        extinction,
        exp_decay,
        failure,
    };
    Ok(Outcome { run, ledger, report })
}

/// Simulates a prepared run and evaluates the enabled diagnostics.
///
/// A numerical breakdown still yields an outcome for the partial run, paired
/// with the runtime error.
pub fn execute(p: &Prepared) -> Result<Outcome, (Option<Box<Outcome>>, CliError)> {
    match simulate(&p.u0, &p.params, &p.forcing, &p.scheme) {
        Ok(run) => diagnose(p, run, None).map_err(|e| (None, e)),
        Err(err) => {
            let msg = err.to_string();
            let partial = diagnose(p, (*err.partial).clone(), Some(msg)).ok().map(Box::new);
            Err((partial, CliError::runtime(err)))
        }
    }
}

fn csv_value(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

#[derive(Serialize)]
struct RunFile<'a> {
    params: &'a PhysicalParams,
    grid: &'a Grid,
    scheme: &'a SchemeConfig,
    forcing: ForcingKind,
    t_star_observed: Option<f64>,
    snapshots: &'a [glx_core::dynamics::Snapshot],
    times: &'a [f64],
    mass_history: &'a [f64],
}

/// Writes `run.json`, `trajectory.csv`, `ledger.csv`, `report.json` and the
/// final field `final.bin` into `dir`.
pub fn write_artifacts(dir: &Path, p: &Prepared, out: &Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let run = &out.run;

    let file = RunFile {
        params: &run.params,
        grid: &run.grid,
        scheme: &run.scheme,
        forcing: p.forcing.kind(),
        t_star_observed: run.t_star_observed,
        snapshots: &run.snapshots,
        times: &run.times,
        mass_history: &run.mass_history,
    };
    write_json(&dir.join("run.json"), &file)?;
    write_json(&dir.join("report.json"), &out.report)?;

    let mut w = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    writeln!(w, "t,mass,grad_norm,lm1_norm,lp1_norm,envelope,residual")?;
    let env_base = out.report.extinction.as_ref().map(|r| r.mass_at_t0);
    let (m, pp) = (p.params.m, p.params.p);
    for (i, s) in run.snapshots.iter().enumerate() {
        let envelope = match (&p.constants, env_base) {
            (Some(k), Some(base)) if s.t >= k.t0 => k.envelope(s.t, base).ok(),
            _ => None,
        };
        let residual = out
            .ledger
            .as_ref()
            .and_then(|rows| i.checked_sub(1).and_then(|j| rows.get(j)))
            .filter(|row| row.t == s.t)
            .map(|row| row.residual);
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            s.t,
            s.mass,
            s.grad_norm_sq.sqrt(),
            s.lm1.powf(1.0 / (m + 1.0)),
            s.lp1.powf(1.0 / (pp + 1.0)),
            csv_value(envelope),
            csv_value(residual),
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("ledger.csv"))?);
    writeln!(w, "t,mass_sq,grad,lm1,lp1,gamma,forcing,residual")?;
    for r in out.ledger.iter().flatten() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.mass_sq, r.grad_term, r.lm1_term, r.lp1_term, r.gamma_term, r.forcing_term, r.residual
        )?;
    }
    w.flush()?;

    let w = BufWriter::new(File::create(dir.join("final.bin"))?);
    write_binary(&run.final_field, w)?;
    Ok(())
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Output directory: the override, then `[output] dir` relative to the
/// config, then `./out`.
pub fn output_dir(cfg: &RunConfig, base: &Path, out: Option<&Path>) -> PathBuf {
    match (out, &cfg.output.dir) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => base.join(dir),
        (None, None) => PathBuf::from("out"),
    }
}

/// Runs one config end to end and writes its artifacts.
pub fn cmd_simulate(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> CliResult<Report> {
    let (mut cfg, base) = load(config_path)?;
    if let Some(seed) = seed {
        cfg.output.seed = seed;
    }
    let dir = output_dir(&cfg, &base, out);
    let prepared = prepare(&cfg, &base)?;
    match execute(&prepared) {
        Ok(outcome) => {
            write_artifacts(&dir, &prepared, &outcome).failed()?;
            Ok(outcome.report)
        }
        Err((partial, err)) => {
            if let Some(outcome) = partial {
                // Best effort: the runtime error is what gets reported.
                let _ = write_artifacts(&dir, &prepared, &outcome);
            }
            Err(err)
        }
    }
}
