//! Time integration by operator splitting.
//!
//! Each step alternates Crank–Nicolson solves for `u' = e^{iθ}Δu` with the
//! pointwise flow of the damping terms ([`pointwise`]). The pointwise flow
//! never divides by `|u|`; it lands on exact zeros, so extinction can be
//! detected as an exact zero of the discrete mass.

mod pointwise;

pub use pointwise::{damping_substep, DampingError, PointwiseFlow};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::field::{ComplexField, Grid, HelmholtzSolver, SolveError};
use crate::forcing::{ForcingError, ForcingProfile};
use crate::params::{PhysicalParams, ViolationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplittingOrder {
    Lie,
    #[default]
    Strang,
}

fn default_stride() -> usize {
    1
}

fn default_solver_tolerance() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Mass at or below this counts as extinct; 0 means exact zero.
    #[serde(default)]
    pub extinction_tolerance: f64,
    #[serde(default)]
    pub splitting: SplittingOrder,
    /// Keep a copy of the field at every snapshot.
    #[serde(default)]
    pub store_fields: bool,
    #[serde(default = "default_solver_tolerance")]
    pub solver_tolerance: f64,
}

impl SchemeConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            snapshot_stride: 1,
            extinction_tolerance: 0.0,
            splitting: SplittingOrder::Strang,
            store_fields: false,
            solver_tolerance: default_solver_tolerance(),
        }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SchemeError::Dt(self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(SchemeError::TEnd(self.t_end));
        }
        if self.snapshot_stride == 0 {
            return Err(SchemeError::Stride);
        }
        if !(self.extinction_tolerance.is_finite() && self.extinction_tolerance >= 0.0) {
            return Err(SchemeError::Tolerance(self.extinction_tolerance));
        }
        if !(self.solver_tolerance.is_finite() && self.solver_tolerance > 0.0) {
            return Err(SchemeError::Tolerance(self.solver_tolerance));
        }
        Ok(())
    }

    /// Number of steps; the run ends at `n_steps · dt ≥ t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("dt must be positive and finite, got {0}")]
    Dt(f64),
    #[error("t_end must be nonnegative and finite, got {0}")]
    TEnd(f64),
    #[error("snapshot_stride must be at least 1")]
    Stride,
    #[error("tolerances must be nonnegative and finite, got {0}")]
    Tolerance(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("invalid parameters: {0}")]
    Invalid(#[from] ViolationReport),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("state, forcing and integrator grids differ")]
    GridMismatch,
    #[error("parameter dimension {params} does not match grid dimension {grid}")]
    Dimension { params: usize, grid: usize },
    #[error("diffusion solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error("forcing evaluation failed: {0}")]
    Forcing(#[from] ForcingError),
    #[error("damping substep failed at grid index {index}: {source}")]
    Damping { index: usize, source: DampingError },
    #[error("state became non-finite")]
    NonFinite,
}

/// Crank–Nicolson step of `u' = e^{iθ}Δu` over `dt`.
pub fn diffusion_substep(u: &ComplexField, dt: f64, theta: f64) -> Result<ComplexField, SolveError> {
    let sigma = crate::params::rotation(theta) * (0.5 * dt);
    let solver = HelmholtzSolver::with_tolerance(*u.grid(), sigma, default_solver_tolerance());
    crank_nicolson(&solver, u)
}

fn crank_nicolson(solver: &HelmholtzSolver, u: &ComplexField) -> Result<ComplexField, SolveError> {
    if u.is_zero() {
        return Ok(u.clone());
    }
    let rhs = u.add_scaled(solver.sigma(), &u.apply_laplacian());
    solver.solve(&rhs)
}

/// Stepper with the diffusion solvers factored once for a fixed `dt`.
#[derive(Clone, Debug)]
pub struct Integrator {
    params: PhysicalParams,
    grid: Grid,
    dt: f64,
    splitting: SplittingOrder,
    diffusion: HelmholtzSolver,
    rotation: Complex64,
}

impl Integrator {
    pub fn new(params: &PhysicalParams, grid: Grid, scheme: &SchemeConfig) -> Result<Self, StepError> {
        params.validate()?;
        scheme.validate()?;
        if params.dim != grid.dim {
            return Err(StepError::Dimension {
                params: params.dim,
                grid: grid.dim,
            });
        }
        let sub_dt = match scheme.splitting {
            SplittingOrder::Strang => 0.5 * scheme.dt,
            SplittingOrder::Lie => scheme.dt,
        };
        let sigma = params.rotation() * (0.5 * sub_dt);
        Ok(Self {
            params: params.clone(),
            grid,
            dt: scheme.dt,
            splitting: scheme.splitting,
            diffusion: HelmholtzSolver::with_tolerance(grid, sigma, scheme.solver_tolerance),
            rotation: params.rotation(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advances `u` from `t` to `t + dt`.
    pub fn step(&self, u: &ComplexField, t: f64, forcing: &ForcingProfile) -> Result<ComplexField, StepError> {
        if *u.grid() != self.grid || *forcing.grid() != self.grid {
            return Err(StepError::GridMismatch);
        }
        let t_mid = t + 0.5 * self.dt;
        if u.is_zero() && (forcing.vanishes_at(t_mid) || forcing.feedback_gain().is_some()) {
            return Ok(u.clone());
        }
        let out = match self.splitting {
            SplittingOrder::Strang => {
                let half = crank_nicolson(&self.diffusion, u)?;
                let damped = self.damping(half, t_mid, forcing)?;
                crank_nicolson(&self.diffusion, &damped)?
            }
            SplittingOrder::Lie => {
                let diffused = crank_nicolson(&self.diffusion, u)?;
                self.damping(diffused, t_mid, forcing)?
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(StepError::NonFinite)
        }
    }

    fn damping(&self, mut u: ComplexField, t_mid: f64, forcing: &ForcingProfile) -> Result<ComplexField, StepError> {
        let gain = forcing.feedback_gain().unwrap_or(0.0);
        let flow = PointwiseFlow::new(&self.params, gain);
        let dt = self.dt;
        let amp = forcing.amplitude(t_mid);
        let zero = Complex64::new(0.0, 0.0);
        let drive_scale = self.rotation * amp;
        let shape = forcing.shape().filter(|_| amp != 0.0).map(|s| s.values());
        exec::try_for_each_mut(u.values_mut(), |i, z| {
            let drive = shape.map_or(zero, |s| drive_scale * s[i]);
            *z = flow
                .advance(*z, dt, drive)
                .map_err(|source| StepError::Damping { index: i, source })?;
            Ok::<(), StepError>(())
        })?;
        Ok(u)
    }
}

/// One step with a freshly built [`Integrator`].
pub fn step(
    u: &ComplexField,
    t: f64,
    dt: f64,
    params: &PhysicalParams,
    forcing: &ForcingProfile,
) -> Result<ComplexField, StepError> {
    Integrator::new(params, *u.grid(), &SchemeConfig::new(dt, dt))?.step(u, t, forcing)
}

/// Norms recorded at a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub mass: f64,
    pub grad_norm_sq: f64,
    /// `‖u‖_{m+1}^{m+1}`.
    pub lm1: f64,
    /// `‖u‖_{p+1}^{p+1}`.
    pub lp1: f64,
    #[serde(skip)]
    pub field: Option<ComplexField>,
}

impl Snapshot {
    fn of(u: &ComplexField, t: f64, params: &PhysicalParams, keep: bool) -> Self {
        Self {
            t,
            mass: u.mass_l2(),
            grad_norm_sq: u.grad_norm_sq(),
            lm1: u.lq_power(params.m + 1.0),
            lp1: u.lq_power(params.p + 1.0),
            field: keep.then(|| u.clone()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub params: PhysicalParams,
    pub grid: Grid,
    pub scheme: SchemeConfig,
    pub snapshots: Vec<Snapshot>,
    /// Time and mass after every step, starting with `t = 0`.
    pub times: Vec<f64>,
    pub mass_history: Vec<f64>,
    /// First recorded time with mass at or below the extinction tolerance.
    pub t_star_observed: Option<f64>,
    #[serde(skip)]
    pub final_field: ComplexField,
}

impl RunRecord {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Mass at time `t`, linearly interpolated in the per-step history.
    pub fn mass_at(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s < t);
        if i == self.times.len() {
            return None;
        }
        if self.times[i] == t || i == 0 {
            return Some(self.mass_history[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Some((1.0 - w) * self.mass_history[i - 1] + w * self.mass_history[i])
    }
}

#[derive(Debug, Error)]
#[error("simulation failed at t = {t} (step {step}): {source}")]
pub struct SimulationError {
    pub t: f64,
    pub step: usize,
    /// Everything recorded before the failing step.
    pub partial: Box<RunRecord>,
    #[source]
    pub source: StepError,
}

/// Runs the scheme from `u0` to `scheme.t_end`.
pub fn simulate(
    u0: &ComplexField,
    params: &PhysicalParams,
    forcing: &ForcingProfile,
    scheme: &SchemeConfig,
) -> Result<RunRecord, Box<SimulationError>> {
    let grid = *u0.grid();
    let mut record = RunRecord {
        params: params.clone(),
        grid,
        scheme: scheme.clone(),
        snapshots: Vec::new(),
        times: Vec::new(),
        mass_history: Vec::new(),
        t_star_observed: None,
        final_field: u0.clone(),
    };
    let fail = |record: RunRecord, t: f64, step: usize, source: StepError| {
        Box::new(SimulationError {
            t,
            step,
            partial: Box::new(record),
            source,
        })
    };
    let integrator = match Integrator::new(params, grid, scheme) {
        Ok(i) => i,
        Err(e) => return Err(fail(record, 0.0, 0, e)),
    };
    if !u0.is_finite() {
        return Err(fail(record, 0.0, 0, StepError::NonFinite));
    }
    if *forcing.grid() != grid {
        return Err(fail(record, 0.0, 0, StepError::GridMismatch));
    }
    let tol = scheme.extinction_tolerance;
    let n_steps = scheme.n_steps();
    let mut u = u0.clone();
    let observe = |record: &mut RunRecord, u: &ComplexField, k: usize| {
        let t = k as f64 * scheme.dt;
        let snap = k.is_multiple_of(scheme.snapshot_stride) || k == n_steps;
        let mass = if snap {
            let s = Snapshot::of(u, t, params, scheme.store_fields);
            let mass = s.mass;
            record.snapshots.push(s);
            mass
        } else {
            u.mass_l2()
        };
        record.times.push(t);
        record.mass_history.push(mass);
        if record.t_star_observed.is_none() && mass <= tol {
            record.t_star_observed = Some(t);
        }
    };
    observe(&mut record, &u, 0);
    for k in 0..n_steps {
        let t = k as f64 * scheme.dt;
        match integrator.step(&u, t, forcing) {
            Ok(next) => u = next,
            Err(e) => {
                record.final_field = u;
                return Err(fail(record, t, k, e));
            }
        }
        observe(&mut record, &u, k + 1);
    }
    record.final_field = u;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ShapeSpec;
    use crate::forcing::TimeEnvelope;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid1() -> Grid {
        Grid::new(1, 4.0, 63).unwrap()
    }

    fn bump(grid: Grid) -> ComplexField {
        ShapeSpec::bump(0.0, 2.0, c(0.8, 0.3)).sample(grid).unwrap()
    }

    #[test]
    fn diffusion_of_zero() {
        let g = grid1();
        assert!(diffusion_substep(&ComplexField::zeros(g), 0.1, 0.3).unwrap().is_zero());
    }

    #[test]
    fn diffusion_eigenmode_factor() {
        let g = grid1();
        let n = g.points_per_axis as f64;
        let h = g.spacing();
        let k = 3.0;
        let mu = 4.0 / (h * h) * (k * PI / (2.0 * (n + 1.0))).sin().powi(2);
        let u = ComplexField::from_fn(g, |x| c((k * PI * (x[0] + g.half_width) / (2.0 * g.half_width)).sin(), 0.0));
        let dt = 0.05;
        let out = diffusion_substep(&u, dt, 0.0).unwrap();
        let factor = (1.0 - dt * mu / 2.0) / (1.0 + dt * mu / 2.0);
        let err = out.sub(&u.scaled(c(factor, 0.0))).mass_l2() / u.mass_l2();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn diffusion_does_not_increase_mass() {
        for dim in 1..=2 {
            let g = Grid::new(dim, 2.0, 15).unwrap();
            let u = ComplexField::from_fn(g, |x| c(x[0].sin() + 0.3, x.iter().sum::<f64>().cos()));
            for theta in [0.0, PI / 4.0, -1.2] {
                let out = diffusion_substep(&u, 0.1, theta).unwrap();
                assert!(out.mass_l2() <= u.mass_l2() * (1.0 + 1e-13));
            }
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = grid1();
        let p = PhysicalParams::heat(0.0, 1);
        let out = step(&ComplexField::zeros(g), 0.0, 0.01, &p, &ForcingProfile::zero(g)).unwrap();
        assert!(out.is_zero());
    }

    #[test]
    fn zero_initial_data_run() {
        let g = grid1();
        let p = PhysicalParams::heat(0.0, 1);
        let run = simulate(&ComplexField::zeros(g), &p, &ForcingProfile::zero(g), &SchemeConfig::new(0.1, 1.0)).unwrap();
        assert!(run.mass_history.iter().all(|&m| m == 0.0));
        assert_eq!(run.t_star_observed, Some(0.0));
        assert_eq!(run.times.len(), 11);
    }

    #[test]
    fn saturated_run_goes_extinct_and_stays() {
        let g = grid1();
        let p = PhysicalParams::heat(0.0, 1);
        let run = simulate(&bump(g), &p, &ForcingProfile::zero(g), &SchemeConfig::new(0.01, 3.0)).unwrap();
        let ts = run.t_star_observed.expect("extinction");
        assert!(ts < 3.0);
        for (t, m) in run.times.iter().zip(&run.mass_history) {
            if *t >= ts {
                assert_eq!(*m, 0.0);
            }
        }
        for w in run.mass_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-13));
        }
    }

    #[test]
    fn snapshot_stride_keeps_endpoints() {
        let g = grid1();
        let p = PhysicalParams::heat(0.5, 1);
        let mut s = SchemeConfig::new(0.1, 1.05);
        s.snapshot_stride = 4;
        let run = simulate(&bump(g), &p, &ForcingProfile::zero(g), &s).unwrap();
        let ts: Vec<f64> = run.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(run.times.len(), 12);
        assert_eq!(ts.len(), 4);
        assert_eq!(ts[0], 0.0);
        assert!((ts[3] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn step_is_deterministic() {
        let g = Grid::new(2, 2.0, 15).unwrap();
        let p = PhysicalParams {
            b: c(0.5, 0.1),
            gamma: c(0.1, 0.2),
            ..PhysicalParams::heat(0.4, 2)
        };
        let f = ForcingProfile::free(ShapeSpec::gaussian(0.0, 1.0, c(0.2, 0.0)).sample(g).unwrap(), TimeEnvelope::Cosine { omega: 1.0 });
        let u = ShapeSpec::gaussian(0.3, 0.8, c(1.0, -0.5)).sample(g).unwrap();
        let a = step(&u, 0.2, 0.01, &p, &f).unwrap();
        let b = step(&u, 0.2, 0.01, &p, &f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strang_beats_lie_on_smooth_data() {
        let g = grid1();
        let p = PhysicalParams {
            a: c(1.0, 0.5),
            ..PhysicalParams::heat(1.0, 1)
        };
        let u0 = ShapeSpec::gaussian(0.0, 1.0, c(1.0, 0.0)).sample(g).unwrap();
        let f = ForcingProfile::zero(g);
        let run = |dt: f64, order: SplittingOrder| {
            let mut s = SchemeConfig::new(dt, 0.5);
            s.splitting = order;
            simulate(&u0, &p, &f, &s).unwrap().final_field
        };
        let reference = run(1e-4, SplittingOrder::Strang);
        let e_strang = run(0.05, SplittingOrder::Strang).sub(&reference).mass_l2();
        let e_lie = run(0.05, SplittingOrder::Lie).sub(&reference).mass_l2();
        assert!(e_strang < e_lie, "{e_strang} vs {e_lie}");
    }

    #[test]
    fn mismatched_dimension_is_rejected() {
        let g = grid1();
        let p = PhysicalParams::heat(0.0, 2);
        let err = simulate(&bump(g), &p, &ForcingProfile::zero(g), &SchemeConfig::new(0.1, 1.0)).unwrap_err();
        assert!(matches!(err.source, StepError::Dimension { .. }));
    }

    #[test]
    fn bad_scheme_is_rejected() {
        assert!(SchemeConfig::new(0.0, 1.0).validate().is_err());
        assert!(SchemeConfig::new(0.1, -1.0).validate().is_err());
        assert_eq!(SchemeConfig::new(0.1, 1.0).n_steps(), 10);
        assert_eq!(SchemeConfig::new(0.3, 1.0).n_steps(), 4);
        assert_eq!(SchemeConfig::new(0.1, 0.0).n_steps(), 0);
    }
}
