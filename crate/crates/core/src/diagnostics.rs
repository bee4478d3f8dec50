//! Checks computed from finished runs: the L² energy ledger, the extinction
//! envelope and bound, exponential decay for `m = 1`, and continuous
//! dependence on the data.

use serde::Serialize;
use thiserror::Error;

use crate::comparison_ode::gauss_legendre;
use crate::dynamics::RunRecord;
use crate::forcing::{ForcingError, ForcingKind, ForcingProfile};
use crate::params::{DerivedConstants, PhysicalParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {needed} snapshots, run has {got}")]
    TooFewSnapshots { needed: usize, got: usize },
    #[error("this check needs field snapshots; rerun with store_fields enabled")]
    MissingFields,
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error("feedback forcing is not supported by this check")]
    Feedback,
    #[error("exponential decay check needs m = 1, got m = {0}")]
    NeedsUnitExponent(f64),
    #[error("constants were built for m = {constants}, run has m = {run}")]
    ConstantsMismatch { constants: f64, run: f64 },
    #[error("T0 = {0} lies outside the run")]
    T0OutOfRange(f64),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

/// One row of the discrete energy balance at an interior snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyLedgerRow {
    pub t: f64,
    pub mass_sq: f64,
    /// `‖∇u‖²`.
    pub grad_term: f64,
    /// `‖u‖_{m+1}^{m+1}`.
    pub lm1_term: f64,
    /// `‖u‖_{p+1}^{p+1}`.
    pub lp1_term: f64,
    /// `Re(γe^{iθ}) ‖u‖²`.
    pub gamma_term: f64,
    /// `Re(e^{iθ} ⟨f, u⟩)`.
    pub forcing_term: f64,
    /// `½(‖u‖²)' + cosθ grad + Re(ae^{iθ}) lm1 + Re(be^{iθ}) lp1 + gamma − forcing`.
    pub residual: f64,
}

/// Energy balance at every interior snapshot, with the time derivative of
/// `‖u‖²` taken by three-point centered differences on the snapshot times.
pub fn energy_ledger(
    run: &RunRecord,
    params: &PhysicalParams,
    forcing: &ForcingProfile,
) -> Result<Vec<EnergyLedgerRow>, DiagnosticsError> {
    let snaps = &run.snapshots;
    if snaps.len() < 3 {
        return Err(DiagnosticsError::TooFewSnapshots {
            needed: 3,
            got: snaps.len(),
        });
    }
    let forced = forcing.kind() != ForcingKind::Zero;
    if forced && snaps.iter().any(|s| s.field.is_none()) {
        return Err(DiagnosticsError::MissingFields);
    }
    let rot = params.rotation();
    let (cos, ra, rb, rg) = (
        params.theta.cos(),
        params.rotated_a().re,
        params.rotated_b().re,
        params.rotated_gamma().re,
    );
    let mut rows = Vec::with_capacity(snaps.len() - 2);
    for i in 1..snaps.len() - 1 {
        let (prev, cur, next) = (&snaps[i - 1], &snaps[i], &snaps[i + 1]);
        let h1 = cur.t - prev.t;
        let h2 = next.t - cur.t;
        let (y0, y1, y2) = (prev.mass.powi(2), cur.mass.powi(2), next.mass.powi(2));
        let dy = -h2 / (h1 * (h1 + h2)) * y0 + (h2 - h1) / (h1 * h2) * y1 + h1 / (h2 * (h1 + h2)) * y2;
        let forcing_term = match &cur.field {
            Some(u) if forced => {
                let f = forcing.eval(cur.t, Some(u))?;
                (rot * f.inner(u)).re
            }
            _ => 0.0,
        };
        let gamma_term = rg * y1;
        let residual =
            0.5 * dy + cos * cur.grad_norm_sq + ra * cur.lm1 + rb * cur.lp1 + gamma_term - forcing_term;
        rows.push(EnergyLedgerRow {
            t: cur.t,
            mass_sq: y1,
            grad_term: cur.grad_norm_sq,
            lm1_term: cur.lm1,
            lp1_term: cur.lp1,
            gamma_term,
            forcing_term,
            residual,
        });
    }
    Ok(rows)
}

/// Largest `|residual|` in a ledger.
pub fn max_abs_residual(rows: &[EnergyLedgerRow]) -> f64 {
    rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub t_star_observed: Option<f64>,
    pub t_star_bound: f64,
    /// `max_{t ≥ T₀} (mass(t) − envelope(t))₊` over the per-step history.
    pub envelope_max_violation: f64,
    pub bound_satisfied: bool,
    /// The rate `M` entering the envelope.
    pub m_used: f64,
    pub mass_at_t0: f64,
    pub safety_factor: f64,
}

/// Compares a run with the envelope and extinction bound of `k`.
pub fn extinction_report(
    run: &RunRecord,
    k: &DerivedConstants,
    safety_factor: f64,
) -> Result<ExtinctionReport, DiagnosticsError> {
    if k.m != run.params.m {
        return Err(DiagnosticsError::ConstantsMismatch {
            constants: k.m,
            run: run.params.m,
        });
    }
    let mass_at_t0 = run.mass_at(k.t0).ok_or(DiagnosticsError::T0OutOfRange(k.t0))?;
    let mut violation: f64 = 0.0;
    for (&t, &mass) in run.times.iter().zip(&run.mass_history) {
        if t < k.t0 {
            continue;
        }
        let env = k.envelope(t, mass_at_t0).unwrap_or(f64::INFINITY);
        violation = violation.max(mass - env);
    }
    let t_star_bound = k.extinction_bound(mass_at_t0);
    let bound_satisfied = run
        .t_star_observed
        .is_some_and(|t| t <= t_star_bound * safety_factor);
    Ok(ExtinctionReport {
        t_star_observed: run.t_star_observed,
        t_star_bound,
        envelope_max_violation: violation,
        bound_satisfied,
        m_used: k.big_m,
        mass_at_t0,
        safety_factor,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayCheck {
    pub max_excess: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// `max_{t ≥ t0} mass(t) − mass(t0) e^{−Re(ae^{iθ})(t − t0)}` for `m = 1`.
pub fn exp_decay_check(
    run: &RunRecord,
    params: &PhysicalParams,
    t0: f64,
    tolerance: f64,
) -> Result<DecayCheck, DiagnosticsError> {
    if params.m != 1.0 {
        return Err(DiagnosticsError::NeedsUnitExponent(params.m));
    }
    let m0 = run.mass_at(t0).ok_or(DiagnosticsError::T0OutOfRange(t0))?;
    let rate = params.damping_rate();
    let max_excess = run
        .times
        .iter()
        .zip(&run.mass_history)
        .filter(|(t, _)| **t >= t0)
        .map(|(t, m)| m - m0 * (-rate * (t - t0)).exp())
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    Ok(DecayCheck {
        max_excess,
        tolerance,
        holds: max_excess <= tolerance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DependenceCheck {
    /// `max_{s ≤ t} ‖Δu(t)‖ − ‖Δu(s)‖ − ∫ₛᵗ ‖Δf‖`.
    pub max_excess: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub pairs: usize,
}

/// Continuous dependence on all snapshot pairs `s ≤ t` of two runs.
pub fn dependence_check(
    run_a: &RunRecord,
    run_b: &RunRecord,
    f_a: &ForcingProfile,
    f_b: &ForcingProfile,
    tolerance: f64,
) -> Result<DependenceCheck, DiagnosticsError> {
    if run_a.grid != run_b.grid || run_a.params != run_b.params || run_a.scheme != run_b.scheme {
        return Err(DiagnosticsError::Mismatch("grid, parameters or scheme differ".into()));
    }
    if run_a.snapshots.len() != run_b.snapshots.len()
        || run_a.snapshots.iter().zip(&run_b.snapshots).any(|(a, b)| a.t != b.t)
    {
        return Err(DiagnosticsError::Mismatch("snapshot times differ".into()));
    }
    if f_a.feedback_gain().is_some() || f_b.feedback_gain().is_some() {
        return Err(DiagnosticsError::Feedback);
    }
    let mut diffs = Vec::with_capacity(run_a.snapshots.len());
    for (a, b) in run_a.snapshots.iter().zip(&run_b.snapshots) {
        match (&a.field, &b.field) {
            (Some(ua), Some(ub)) => diffs.push(ua.sub(ub).mass_l2()),
            _ => return Err(DiagnosticsError::MissingFields),
        }
    }
    let times: Vec<f64> = run_a.snapshots.iter().map(|s| s.t).collect();
    let cumulative = forcing_gap_integral(f_a, f_b, &times)?;
    let n = times.len();
    let mut max_excess = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i..n {
            let excess = diffs[j] - diffs[i] - (cumulative[j] - cumulative[i]);
            max_excess = max_excess.max(excess);
        }
    }
    Ok(DependenceCheck {
        max_excess,
        tolerance,
        holds: max_excess <= tolerance,
        pairs: n * (n + 1) / 2,
    })
}

/// `∫_{t₀}^{tᵢ} ‖f_a − f_b‖` at every sample time.
fn forcing_gap_integral(f_a: &ForcingProfile, f_b: &ForcingProfile, times: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let gap = |t: f64| -> Result<f64, ForcingError> { Ok(f_a.eval(t, None)?.sub(&f_b.eval(t, None)?).mass_l2()) };
    // Surface evaluation errors once, before quadrature.
    gap(times[0])?;
    let mut kinks = f_a.breakpoints();
    kinks.extend(f_b.breakpoints());
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in times.windows(2) {
        let mut edges = vec![w[0]];
        edges.extend(kinks.iter().copied().filter(|&k| k > w[0] && k < w[1]));
        edges.push(w[1]);
        for e in edges.windows(2) {
            acc += gauss_legendre(|t| gap(t).unwrap_or(f64::INFINITY), e[0], e[1], 1);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Largest relative increase of the mass between consecutive steps.
pub fn max_mass_increase(run: &RunRecord) -> f64 {
    run.mass_history
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[1] - w[0]) / w[0] } else if w[1] > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True when the mass never grows by more than `rel_tol` in one step.
pub fn mass_nonincreasing(run: &RunRecord, rel_tol: f64) -> bool {
    max_mass_increase(run) <= rel_tol
}
