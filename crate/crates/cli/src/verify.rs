//! Built-in verification recipes. Each runs a self-contained experiment and
//! reports one line per criterion.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail};
use glx_core::comparison_ode::{
    comparison_check, solve_at, solve_comparison, stability_gap, Constant, ExtinctionProfile, PiecewiseConstant,
};
use glx_core::params::{gn_delta, rotation};
use glx_core::Source;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ComplexValue, RunConfig};
use crate::pipeline::{execute, prepare, write_artifacts, Outcome};
use crate::{CliError, CliResult};

pub const EXTINCTION_CONFIG: &str = include_str!("../configs/extinction.toml");
pub const SCHEDULED_CONFIG: &str = include_str!("../configs/scheduled.toml");
pub const EXP_DECAY_CONFIG: &str = include_str!("../configs/exp_decay.toml");
pub const INFINITE_TIME_CONFIG: &str = include_str!("../configs/infinite_time.toml");
pub const LEDGER_CONFIG: &str = include_str!("../configs/ledger.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    /// Unforced extinction, envelope and time bound, several rotations.
    Extinction,
    /// Extinction by a prescribed time under scheduled forcing.
    Scheduled,
    /// Exponential decay for linear damping.
    ExpDecay,
    /// Decay to zero under integrable forcing with linear damping.
    InfiniteTime,
    /// The scalar comparison equation: closed form, stability, comparison.
    Comparison,
}

impl Recipe {
    pub const ALL: [Recipe; 5] = [
        Recipe::Extinction,
        Recipe::Scheduled,
        Recipe::ExpDecay,
        Recipe::InfiniteTime,
        Recipe::Comparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Extinction => "extinction",
            Recipe::Scheduled => "scheduled",
            Recipe::ExpDecay => "exp-decay",
            Recipe::InfiniteTime => "infinite-time",
            Recipe::Comparison => "comparison",
        }
    }

    fn alias(self) -> &'static str {
        match self {
            Recipe::Extinction => "thm2_9_1",
            Recipe::Scheduled => "thm2_9_2",
            Recipe::ExpDecay => "prop2_7",
            Recipe::InfiniteTime => "thm2_6",
            Recipe::Comparison => "lemma3_2",
        }
    }
}

impl FromStr for Recipe {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s || r.alias() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Recipe::ALL.iter().map(|r| r.name()).collect();
                anyhow!("unknown recipe `{s}` (expected one of {})", names.join(", "))
            })
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.label, self.detail)
    }
}

fn run_config(cfg: &RunConfig, out: Option<&Path>, name: &str) -> CliResult<Outcome> {
    let prepared = prepare(cfg, Path::new("."))?;
    let outcome = execute(&prepared).map_err(|(_, e)| e)?;
    if let Some(dir) = out {
        write_artifacts(&dir.join(name), &prepared, &outcome).map_err(CliError::runtime)?;
    }
    Ok(outcome)
}

fn builtin(text: &str) -> CliResult<RunConfig> {
    RunConfig::parse(text).map_err(CliError::runtime)
}

fn extinction(out: Option<&Path>) -> CliResult<Vec<CriterionResult>> {
    let base = builtin(EXTINCTION_CONFIG)?;
    let mut results = Vec::new();
    for theta in [0.0, -1.0, -0.5, 0.5, 1.0] {
        let mut cfg = base.clone();
        cfg.params.theta = theta;
        cfg.params.a = ComplexValue::from(rotation(theta).conj());
        let outcome = run_config(&cfg, out, &format!("theta_{theta}"))?;
        let report = &outcome.report;
        let ext = report
            .extinction
            .as_ref()
            .ok_or_else(|| CliError::runtime(anyhow!("extinction report missing")))?;
        let u0 = report.initial_mass;
        let exact_zero = outcome.run.final_field.is_zero() && ext.t_star_observed.is_some();
        results.push(CriterionResult::new(
            format!("theta={theta} exact extinction"),
            exact_zero,
            format!("observed T* = {:?}", ext.t_star_observed),
        ));
        results.push(CriterionResult::new(
            format!("theta={theta} envelope"),
            ext.envelope_max_violation <= 1e-3 * u0,
            format!("max violation {:.3e} (limit {:.3e})", ext.envelope_max_violation, 1e-3 * u0),
        ));
        results.push(CriterionResult::new(
            format!("theta={theta} extinction bound"),
            ext.bound_satisfied,
            format!(
                "T* = {:?} vs {} x bound {:.6}",
                ext.t_star_observed, ext.safety_factor, ext.t_star_bound
            ),
        ));
    }
    Ok(results)
}

fn scheduled(out: Option<&Path>) -> CliResult<Vec<CriterionResult>> {
    let cfg = builtin(SCHEDULED_CONFIG)?;
    let outcome = run_config(&cfg, out, "scheduled")?;
    let k = outcome
        .report
        .constants
        .as_ref()
        .ok_or_else(|| CliError::runtime(anyhow!("scheduled run has no constants")))?;
    let u0 = outcome.report.initial_mass;
    let admissible = u0.powf(2.0 * (1.0 - k.delta)) <= k.eps_star * k.t0 * (1.0 + 1e-12);
    let at_t0 = outcome.run.mass_at(k.t0).unwrap_or(f64::INFINITY);
    Ok(vec![
        CriterionResult::new(
            "initial norm admissible",
            admissible,
            format!("|u0| = {u0:.6}, eps* = {:.6}, T0 = {}", k.eps_star, k.t0),
        ),
        CriterionResult::new(
            "mass at T0",
            at_t0 <= 1e-6 * u0,
            format!("|u(T0)| = {at_t0:.3e} (limit {:.3e})", 1e-6 * u0),
        ),
    ])
}

fn exp_decay(out: Option<&Path>) -> CliResult<Vec<CriterionResult>> {
    let cfg = builtin(EXP_DECAY_CONFIG)?;
    let outcome = run_config(&cfg, out, "exp_decay")?;
    let check = outcome
        .report
        .exp_decay
        .ok_or_else(|| CliError::runtime(anyhow!("decay check missing")))?;
    let min_mass = outcome.run.mass_history.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(vec![
        CriterionResult::new(
            "exponential envelope",
            check.holds,
            format!("max excess {:.3e} (limit {:.1e})", check.max_excess, check.tolerance),
        ),
        CriterionResult::new(
            "no exact zero",
            min_mass > 0.0 && outcome.run.t_star_observed.is_none(),
            format!("smallest mass {min_mass:.3e}"),
        ),
    ])
}

fn infinite_time(out: Option<&Path>) -> CliResult<Vec<CriterionResult>> {
    let cfg = builtin(INFINITE_TIME_CONFIG)?;
    let outcome = run_config(&cfg, out, "infinite_time")?;
    let (u0, end) = (outcome.report.initial_mass, outcome.report.final_mass);
    Ok(vec![CriterionResult::new(
        "decay to zero",
        end < 1e-6 * u0,
        format!("|u(t_end)| = {end:.3e} (limit {:.3e})", 1e-6 * u0),
    )])
}

/// Random nonnegative step function on `[0, horizon]`.
fn random_steps(rng: &mut ChaCha8Rng, horizon: f64) -> anyhow::Result<PiecewiseConstant> {
    let pieces = rng.random_range(1..6);
    let mut knots: Vec<f64> = (0..pieces - 1).map(|_| rng.random_range(0.0..horizon)).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let values = (0..=knots.len())
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) })
        .collect();
    Ok(PiecewiseConstant::new(knots, values)?)
}

/// Largest excess over the stability estimate across `pairs` random pairs.
pub fn stability_excess(pairs: usize, seed: u64) -> anyhow::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 3.0;
    let times: Vec<f64> = (0..=60).map(|i| i as f64 * horizon / 60.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let alpha = rng.random_range(0.5..2.0);
        let delta = rng.random_range(0.55..0.95);
        let (g1, g2) = (random_steps(&mut rng, horizon)?, random_steps(&mut rng, horizon)?);
        let (a, b) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let z1 = solve_at(alpha, delta, &g1, a, &times)?;
        let z2 = solve_at(alpha, delta, &g2, b, &times)?;
        for &s in times.iter().step_by(12) {
            for &t in times.iter().filter(|&&t| t >= s) {
                let (lhs, rhs) = stability_gap(&z1, &z2, &g1, &g2, s, t)?;
                worst = worst.max(lhs - rhs);
            }
        }
    }
    Ok(worst)
}

fn comparison() -> CliResult<Vec<CriterionResult>> {
    let (alpha, delta, t0) = (1.0, gn_delta(0.0, 1), 1.0);
    let inner = || -> anyhow::Result<Vec<CriterionResult>> {
        let profile = ExtinctionProfile::new(alpha, delta, t0)?;
        let g = profile.forcing();
        let z = solve_comparison(alpha, delta, &g, profile.zeta_star, 0.0, 1.5, 0.01)?;
        let err = z
            .times
            .iter()
            .zip(&z.values)
            .map(|(&t, &v)| (v - profile.zeta(t)).abs())
            .fold(0.0, f64::max);

        let excess = stability_excess(1000, 11)?;

        // A solution with a smaller source is a subsolution for the larger one.
        let small = Constant(0.2);
        let large = Constant(0.5);
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.03).collect();
        let y = solve_at(alpha, delta, &small, 1.3, &times)?;
        let ordered = comparison_check(&y, alpha, delta, &large, 0.0, 1e-10);
        let reversed = {
            let y_big = solve_at(alpha, delta, &large, 1.3, &times)?;
            comparison_check(&y_big, alpha, delta, &small, 0.0, 1e-10)
        };
        if small.value(0.0) >= large.value(0.0) {
            bail!("comparison sources out of order");
        }
        Ok(vec![
            CriterionResult::new("closed form", err <= 1e-8, format!("max error {err:.3e}")),
            CriterionResult::new("stability", excess <= 1e-8, format!("max excess {excess:.3e} over 1000 pairs")),
            CriterionResult::new(
                "comparison principle",
                ordered && !reversed,
                format!("subsolution stays below: {ordered}, supersolution detected: {}", !reversed),
            ),
        ])
    };
    inner().map_err(CliError::runtime)
}

/// Runs a recipe. Artifacts of its simulations go under `out` when given.
pub fn run_recipe(recipe: Recipe, out: Option<&Path>) -> CliResult<Vec<CriterionResult>> {
    match recipe {
        Recipe::Extinction => extinction(out),
        Recipe::Scheduled => scheduled(out),
        Recipe::ExpDecay => exp_decay(out),
        Recipe::InfiniteTime => infinite_time(out),
        Recipe::Comparison => comparison(),
    }
}

/// Prints one line per criterion; fails with exit code 1 if any criterion fails.
pub fn cmd_verify(recipe: Recipe, out: Option<&Path>, w: &mut dyn std::io::Write) -> CliResult<Vec<CriterionResult>> {
    let results = run_recipe(recipe, out)?;
    for r in &results {
        writeln!(w, "{r}").map_err(CliError::runtime)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::check(anyhow!("{failed} of {} criteria failed in {recipe}", results.len())));
    }
    Ok(results)
}
