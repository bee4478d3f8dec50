//! The scalar equation `z' + αz^δ = g` with `g ≥ 0`, its stability and
//! comparison properties, and the explicit solutions used to build the
//! scheduled-extinction forcing.
//!
//! On intervals where `g` vanishes identically the separable solution is
//! used directly, so extinction of `z` is exact.

use std::cell::Cell;

use serde::Serialize;
use thiserror::Error;

use crate::rk;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("rate must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("exponent must be positive and finite, got {0}")]
    Delta(f64),
    #[error("initial value must be nonnegative and finite, got {0}")]
    InitialValue(f64),
    #[error("source is negative at t = {t}: g = {value}")]
    NegativeSource { t: f64, value: f64 },
    #[error("sample times must be finite and strictly increasing")]
    Times,
    #[error("output spacing must be positive, got {0}")]
    OutputSpacing(f64),
    #[error("step size underflow at t = {t} with z = {z} (step {h:e})")]
    Underflow { t: f64, z: f64, h: f64 },
    #[error("trajectory values must be nonnegative and finite")]
    Values,
    #[error("time {t} lies outside the trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("Young splitting needs 1/2 < delta < 1, got {0}")]
    YoungExponent(f64),
}

/// A nonnegative forcing term of the scalar equation.
pub trait Source: Sync {
    fn value(&self, t: f64) -> f64;

    /// Times where the source may jump or lose smoothness.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// True only if the source is identically zero on `[a, b]`.
    fn is_zero_on(&self, _a: f64, _b: f64) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl Source for Zero {
    fn value(&self, _t: f64) -> f64 {
        0.0
    }

    fn is_zero_on(&self, _a: f64, _b: f64) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl Source for Constant {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn is_zero_on(&self, _a: f64, _b: f64) -> bool {
        self.0 == 0.0
    }
}

/// `values[0]` before `knots[0]`, `values[i+1]` on `[knots[i], knots[i+1])`.
#[derive(Clone, Debug)]
pub struct PiecewiseConstant {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, OdeError> {
        if values.len() != knots.len() + 1 || knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(OdeError::Times);
        }
        Ok(Self { knots, values })
    }

    fn piece(&self, t: f64) -> usize {
        self.knots.partition_point(|&k| k <= t)
    }
}

impl Source for PiecewiseConstant {
    fn value(&self, t: f64) -> f64 {
        self.values[self.piece(t)]
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }

    fn is_zero_on(&self, a: f64, b: f64) -> bool {
        let (i, j) = (self.piece(a), self.piece(b));
        // The right endpoint only matters if it is interior to a piece.
        let j = if j > i && self.knots[j - 1] == b { j - 1 } else { j };
        self.values[i..=j].iter().all(|&v| v == 0.0)
    }
}

/// `scale · (t0 − t)₊^exponent`.
#[derive(Clone, Copy, Debug)]
pub struct PowerProfile {
    pub scale: f64,
    pub t0: f64,
    pub exponent: f64,
}

impl Source for PowerProfile {
    fn value(&self, t: f64) -> f64 {
        let s = self.t0 - t;
        if s <= 0.0 {
            0.0
        } else {
            self.scale * s.powf(self.exponent)
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.t0]
    }

    fn is_zero_on(&self, a: f64, _b: f64) -> bool {
        self.scale == 0.0 || a >= self.t0
    }
}

/// Wraps a closure; never treated as identically zero.
pub struct FnSource<F> {
    f: F,
    breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64 + Sync> FnSource<F> {
    pub fn new(f: F, breakpoints: Vec<f64>) -> Self {
        Self { f, breakpoints }
    }
}

impl<F: Fn(f64) -> f64 + Sync> Source for FnSource<F> {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// Nonnegative samples of a scalar function of time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScalarTrajectory {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, OdeError> {
        check_times(&times)?;
        if values.len() != times.len() {
            return Err(OdeError::Times);
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OdeError::Values);
        }
        Ok(Self { times, values })
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("trajectory is nonempty")
    }

    /// Value at `t`, exact on sample times and linear in between.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if !(t >= self.start() && t <= self.end()) {
            return None;
        }
        let i = self.times.partition_point(|&s| s < t);
        if self.times[i] == t {
            return Some(self.values[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Some((1.0 - w) * self.values[i - 1] + w * self.values[i])
    }

    fn value_checked(&self, t: f64) -> Result<f64, OdeError> {
        self.value_at(t).ok_or(OdeError::OutOfRange {
            t,
            start: self.start(),
            end: self.end(),
        })
    }
}

fn check_times(times: &[f64]) -> Result<(), OdeError> {
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(OdeError::Times);
    }
    Ok(())
}

/// Separable solution of `z' + αz^δ = 0` after time `dt`.
pub fn free_decay(alpha: f64, delta: f64, z: f64, dt: f64) -> f64 {
    if z == 0.0 || dt == 0.0 {
        return z;
    }
    if delta == 1.0 {
        return z * (-alpha * dt).exp();
    }
    let one_d = 1.0 - delta;
    let s = z.powf(one_d) - alpha * one_d * dt;
    if delta < 1.0 && s <= 0.0 {
        0.0
    } else {
        s.powf(1.0 / one_d)
    }
}

/// Extinction time of the unforced equation, `z0^{1−δ} / (α(1−δ))` for `δ < 1`.
pub fn free_extinction_time(alpha: f64, delta: f64, z0: f64) -> Option<f64> {
    (delta < 1.0).then(|| z0.powf(1.0 - delta) / (alpha * (1.0 - delta)))
}

fn check_inputs(alpha: f64, delta: f64, z0: f64) -> Result<(), OdeError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(OdeError::Alpha(alpha));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(OdeError::Delta(delta));
    }
    if !(z0.is_finite() && z0 >= 0.0) {
        return Err(OdeError::InitialValue(z0));
    }
    Ok(())
}

/// Solves from `z(t0) = z0` and samples every `dt_out` up to `t_end`
/// (the last sample is exactly `t_end`).
pub fn solve_comparison(
    alpha: f64,
    delta: f64,
    g: &dyn Source,
    z0: f64,
    t0: f64,
    t_end: f64,
    dt_out: f64,
) -> Result<ScalarTrajectory, OdeError> {
    if !(dt_out.is_finite() && dt_out > 0.0) {
        return Err(OdeError::OutputSpacing(dt_out));
    }
    if !(t_end >= t0) {
        return Err(OdeError::Times);
    }
    let n = ((t_end - t0) / dt_out - 1e-9).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt_out).collect();
    times.push(t_end);
    times.dedup();
    solve_at(alpha, delta, g, z0, &times)
}

/// Solves from `z(times[0]) = z0` and samples at `times`.
pub fn solve_at(alpha: f64, delta: f64, g: &dyn Source, z0: f64, times: &[f64]) -> Result<ScalarTrajectory, OdeError> {
    check_inputs(alpha, delta, z0)?;
    check_times(times)?;
    let mut kinks = g.breakpoints();
    kinks.retain(|k| k.is_finite());
    kinks.sort_by(f64::total_cmp);
    let mut values = Vec::with_capacity(times.len());
    values.push(z0);
    let mut z = z0;
    let mut h = (times.last().unwrap() - times[0]).max(1e-3) / 64.0;
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut edges = vec![a];
        edges.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
        edges.push(b);
        for seg in edges.windows(2) {
            let (sa, sb) = (seg[0], seg[1]);
            if g.is_zero_on(sa, sb) {
                z = free_decay(alpha, delta, z, sb - sa);
            } else {
                let (next, h_last) = integrate_segment(alpha, delta, g, z, sa, sb, h)?;
                z = next;
                h = h_last;
            }
        }
        values.push(z);
    }
    Ok(ScalarTrajectory {
        times: times.to_vec(),
        values,
    })
}

fn integrate_segment(
    alpha: f64,
    delta: f64,
    g: &dyn Source,
    z0: f64,
    a: f64,
    b: f64,
    h_init: f64,
) -> Result<(f64, f64), OdeError> {
    let negative: Cell<Option<(f64, f64)>> = Cell::new(None);
    let rhs = |t: f64, z: f64| {
        let gt = g.value(t);
        if gt < 0.0 && negative.get().is_none() {
            negative.set(Some((t, gt)));
        }
        gt - alpha * z.max(0.0).powf(delta)
    };
    let opts = rk::Options {
        rtol: 1e-10,
        atol: 1e-12,
        h_min: 1e-14 * (b - a).abs().max(1.0) * f64::EPSILON.sqrt(),
        h_init: h_init.min(b - a),
        max_steps: 20_000,
    };
    // Undershoots below zero that are within the absolute tolerance are
    // extinction, not error.
    let clamp = |z: &mut f64| {
        if *z < 0.0 && *z >= -opts.atol {
            *z = 0.0;
        }
        *z >= 0.0
    };
    // Backward Euler for the stiff regime near small equilibria, where
    // `αδz^{δ−1}` outruns any explicit step.
    let h_stiff = (b - a) / 256.0;
    let implicit = |t: f64, z: f64, h: f64| backward_euler(alpha, delta, z + h * g.value(t + h), h);
    let stiff = |z: &f64| delta < 1.0 && alpha * delta * z.powf(delta - 1.0) * h_stiff > 2.0;
    let result = rk::integrate_with_fallback(
        rhs,
        a,
        z0,
        b,
        &opts,
        clamp,
        |_, _| rk::Hook::Continue,
        h_stiff,
        implicit,
        stiff,
    );
    if let Some((t, value)) = negative.get() {
        return Err(OdeError::NegativeSource { t, value });
    }
    match result {
        Ok(sol) => Ok((sol.y, sol.h_last)),
        Err(f) => Err(OdeError::Underflow { t: f.t, z: f.y, h: f.h }),
    }
}

/// The root `y ≥ 0` of `y + hαy^δ = rhs`.
fn backward_euler(alpha: f64, delta: f64, rhs: f64, h: f64) -> Option<f64> {
    if !(rhs.is_finite() && rhs >= 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, rhs);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid + h * alpha * mid.powf(delta) > rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(lo)
}

/// Both sides of `|z₁(t) − z₂(t)| ≤ |z₁(s) − z₂(s)| + ∫ₛᵗ |g₁ − g₂|`.
pub fn stability_gap(
    z1: &ScalarTrajectory,
    z2: &ScalarTrajectory,
    g1: &dyn Source,
    g2: &dyn Source,
    s: f64,
    t: f64,
) -> Result<(f64, f64), OdeError> {
    if !(s <= t) {
        return Err(OdeError::Times);
    }
    let lhs = (z1.value_checked(t)? - z2.value_checked(t)?).abs();
    let start = (z1.value_checked(s)? - z2.value_checked(s)?).abs();
    let mut kinks = g1.breakpoints();
    kinks.extend(g2.breakpoints());
    let integral = integrate_abs_difference(g1, g2, s, t, &kinks);
    Ok((lhs, start + integral))
}

/// `∫ₐᵇ |g₁ − g₂|` by Gauss–Legendre panels split at the given kinks.
pub fn integrate_abs_difference(g1: &dyn Source, g2: &dyn Source, a: f64, b: f64, kinks: &[f64]) -> f64 {
    let mut edges = vec![a];
    let mut inner: Vec<f64> = kinks.iter().copied().filter(|&k| k > a && k < b).collect();
    inner.sort_by(f64::total_cmp);
    edges.extend(inner);
    edges.push(b);
    edges
        .windows(2)
        .map(|w| gauss_legendre(|x| (g1.value(x) - g2.value(x)).abs(), w[0], w[1], 16))
        .sum()
}

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Composite five-point Gauss–Legendre rule on `panels` equal panels.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        let half = 0.5 * w;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            total += wt * half * f(mid + half * x);
        }
    }
    total
}

/// Checks `y ≤ z + tol` on every sample after `t_star`, where `z` solves the
/// equation from `z(t_star) = y(t_star)`. Returns false if the comparison
/// solution cannot be computed.
pub fn comparison_check(y: &ScalarTrajectory, alpha: f64, delta: f64, g: &dyn Source, t_star: f64, tol: f64) -> bool {
    let Some(y_star) = y.value_at(t_star) else {
        return false;
    };
    let mut times = vec![t_star];
    let mut ys = vec![y_star];
    for (&t, &v) in y.times.iter().zip(&y.values) {
        if t > t_star {
            times.push(t);
            ys.push(v);
        }
    }
    match solve_at(alpha, delta, g, y_star, &times) {
        Ok(z) => ys.iter().zip(&z.values).all(|(yv, zv)| *yv <= zv + tol),
        Err(_) => false,
    }
}

/// The Young majorant `g = ((2δ−1)/δ)(αδ)^{−1/(2δ−1)} f^{2δ/(2δ−1)}`, for which
/// `2f√y ≤ g + αy^δ` holds for every `y ≥ 0`.
pub fn young_split(alpha: f64, delta: f64, f_l2: f64) -> Result<f64, OdeError> {
    if !(delta > 0.5 && delta < 1.0) {
        return Err(OdeError::YoungExponent(delta));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(OdeError::Alpha(alpha));
    }
    if !(f_l2.is_finite() && f_l2 >= 0.0) {
        return Err(OdeError::InitialValue(f_l2));
    }
    if f_l2 == 0.0 {
        return Ok(0.0);
    }
    let e = 2.0 * delta - 1.0;
    Ok(e / delta * (alpha * delta).powf(-1.0 / e) * f_l2.powf(2.0 * delta / e))
}

/// `g + αy^δ − 2f√y`, nonnegative for the Young majorant `g`.
pub fn young_gap(alpha: f64, delta: f64, f_l2: f64, y: f64) -> Result<f64, OdeError> {
    Ok(young_split(alpha, delta, f_l2)? + alpha * y.powf(delta) - 2.0 * f_l2 * y.sqrt())
}

/// The explicit pair that extinguishes exactly at `t0`:
/// `ζ(t) = ζ★ t0^{−1/(1−δ)} (t0 − t)₊^{1/(1−δ)}` solves `ζ' + αζ^δ = z★ (t0 − t)₊^{δ/(1−δ)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtinctionProfile {
    pub alpha: f64,
    pub delta: f64,
    pub t0: f64,
    /// `(αδ(1−δ)t0)^{1/(1−δ)}`.
    pub zeta_star: f64,
    /// `(αδ^δ(1−δ))^{1/(1−δ)}`.
    pub z_star: f64,
}

impl ExtinctionProfile {
    pub fn new(alpha: f64, delta: f64, t0: f64) -> Result<Self, OdeError> {
        check_inputs(alpha, delta, 0.0)?;
        if delta >= 1.0 {
            return Err(OdeError::Delta(delta));
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(OdeError::Times);
        }
        let inv = 1.0 / (1.0 - delta);
        Ok(Self {
            alpha,
            delta,
            t0,
            zeta_star: (alpha * delta * (1.0 - delta) * t0).powf(inv),
            z_star: (alpha * delta.powf(delta) * (1.0 - delta)).powf(inv),
        })
    }

    pub fn zeta(&self, t: f64) -> f64 {
        let inv = 1.0 / (1.0 - self.delta);
        let s = self.t0 - t;
        if s <= 0.0 {
            0.0
        } else {
            self.zeta_star * self.t0.powf(-inv) * s.powf(inv)
        }
    }

    /// `ζ'(t)` from the closed form.
    pub fn zeta_derivative(&self, t: f64) -> f64 {
        let inv = 1.0 / (1.0 - self.delta);
        let s = self.t0 - t;
        if s <= 0.0 {
            0.0
        } else {
            -inv * self.zeta_star * self.t0.powf(-inv) * s.powf(inv - 1.0)
        }
    }

    pub fn forcing(&self) -> PowerProfile {
        PowerProfile {
            scale: self.z_star,
            t0: self.t0,
            exponent: self.delta / (1.0 - self.delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn free_decay_closed_form() {
        let z = solve_comparison(1.0, 0.5, &Zero, 1.0, 0.0, 3.0, 0.01).unwrap();
        for (t, v) in z.times.iter().zip(&z.values) {
            let want = (1.0 - t / 2.0).max(0.0).powi(2);
            assert_abs_diff_eq!(*v, want, epsilon = 1e-8);
        }
        assert_eq!(z.value_at(2.5), Some(0.0));
    }

    #[test]
    fn zero_stays_zero() {
        let z = solve_comparison(2.0, 0.7, &Zero, 0.0, 0.0, 5.0, 0.5).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn free_extinction_time_matches_envelope() {
        let (alpha, delta, z0) = (0.7, 0.6, 2.5);
        let te = free_extinction_time(alpha, delta, z0).unwrap();
        assert!(free_decay(alpha, delta, z0, te * (1.0 - 1e-9)) > 0.0);
        assert_eq!(free_decay(alpha, delta, z0, te), 0.0);
        // mass = √z with λ = 2(1−δ): the envelope root is mass₀^λ/(λ α/2).
        let lambda = 2.0 * (1.0 - delta);
        let root = z0.sqrt().powf(lambda) / (lambda * alpha / 2.0);
        assert!((root - te).abs() < 1e-12 * te);
    }

    #[test]
    fn explicit_extinction_profile() {
        for (alpha, delta, t0) in [(1.0, 2.0 / 3.0, 1.0), (0.4, 0.6, 2.5), (2.0, 0.8, 0.7)] {
            let p = ExtinctionProfile::new(alpha, delta, t0).unwrap();
            let g = p.forcing();
            let z = solve_comparison(alpha, delta, &g, p.zeta_star, 0.0, 2.0 * t0, t0 / 50.0).unwrap();
            for (t, v) in z.times.iter().zip(&z.values) {
                assert_abs_diff_eq!(*v, p.zeta(*t), epsilon = 1e-8);
            }
            assert_eq!(z.value_at(2.0 * t0), Some(0.0));
        }
    }

    #[test]
    fn explicit_profile_residual() {
        let p = ExtinctionProfile::new(0.9, 0.7, 1.3).unwrap();
        let g = p.forcing();
        for i in 1..100 {
            let t = 1.3 * i as f64 / 100.0;
            let r = p.zeta_derivative(t) + p.alpha * p.zeta(t).powf(p.delta) - g.value(t);
            assert!(r.abs() <= 1e-8, "t = {t}: {r}");
        }
    }

    #[test]
    fn nonnegative_with_forcing() {
        let g = PiecewiseConstant::new(vec![1.0, 2.0, 3.0], vec![0.2, 0.0, 1.0, 0.0]).unwrap();
        let z = solve_comparison(1.5, 0.5, &g, 0.3, 0.0, 6.0, 0.01).unwrap();
        assert!(z.values.iter().all(|&v| v >= 0.0));
        // Unforced after t = 3 with a small value: extinct well before 6.
        assert_eq!(z.value_at(6.0), Some(0.0));
    }

    #[test]
    fn negative_source_rejected() {
        let err = solve_comparison(1.0, 0.5, &Constant(-1.0), 1.0, 0.0, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, OdeError::NegativeSource { .. }));
    }

    #[test]
    fn uniqueness_across_output_grids() {
        let g = FnSource::new(|t: f64| 1.0 + (3.0 * t).sin(), vec![]);
        let a = solve_comparison(1.0, 0.6, &g, 0.5, 0.0, 4.0, 0.5).unwrap();
        let b = solve_comparison(1.0, 0.6, &g, 0.5, 0.0, 4.0, 0.01).unwrap();
        for (t, v) in a.times.iter().zip(&a.values) {
            assert_abs_diff_eq!(*v, b.value_at(*t).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn stability_trivial_and_contraction() {
        let g = Constant(0.5);
        let z1 = solve_comparison(1.0, 0.6, &g, 1.0, 0.0, 3.0, 0.1).unwrap();
        assert_eq!(stability_gap(&z1, &z1, &g, &g, 0.5, 2.0).unwrap(), (0.0, 0.0));
        let z2 = solve_comparison(1.0, 0.6, &g, 2.0, 0.0, 3.0, 0.1).unwrap();
        let (lhs, rhs) = stability_gap(&z1, &z2, &g, &g, 0.5, 2.0).unwrap();
        assert!(lhs <= rhs);
        assert!(stability_gap(&z1, &z2, &g, &g, 0.5, 9.0).is_err());
    }

    #[test]
    fn stability_random_piecewise_sources() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let source = |rng: &mut rand_chacha::ChaCha8Rng| {
            let knots: Vec<f64> = (1..8).map(|i| i as f64 * 0.5).collect();
            let values = (0..8).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) }).collect();
            PiecewiseConstant::new(knots, values).unwrap()
        };
        let g1 = source(&mut rng);
        let g2 = source(&mut rng);
        let z1 = solve_comparison(1.2, 0.6, &g1, 0.8, 0.0, 4.0, 0.02).unwrap();
        let z2 = solve_comparison(1.2, 0.6, &g2, 0.1, 0.0, 4.0, 0.02).unwrap();
        let n = z1.times.len();
        for _ in 0..1000 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(i..n);
            let (lhs, rhs) = stability_gap(&z1, &z2, &g1, &g2, z1.times[i], z1.times[j]).unwrap();
            assert!(lhs <= rhs + 1e-8, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn piecewise_integral_is_exact() {
        let g1 = PiecewiseConstant::new(vec![1.0], vec![1.0, 3.0]).unwrap();
        let v = integrate_abs_difference(&g1, &Zero, 0.0, 2.0, &g1.breakpoints());
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-13);
        assert!(!g1.is_zero_on(5.0, 6.0));
        let g2 = PiecewiseConstant::new(vec![1.0, 2.0], vec![1.0, 0.0, 2.0]).unwrap();
        assert!(g2.is_zero_on(1.0, 2.0));
        assert!(!g2.is_zero_on(1.0, 2.5));
    }

    #[test]
    fn comparison_examples() {
        let zero_traj = ScalarTrajectory::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        assert!(comparison_check(&zero_traj, 1.0, 0.5, &Constant(0.3), 0.0, 0.0));

        // A subsolution of the unforced equation: decays faster.
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.03).collect();
        let sub: Vec<f64> = times.iter().map(|t| free_decay(2.0, 0.5, 1.0, *t)).collect();
        let y = ScalarTrajectory::new(times.clone(), sub).unwrap();
        assert!(comparison_check(&y, 1.0, 0.5, &Zero, 0.0, 1e-12));

        // The solution itself plus a positive bump is not below the solution.
        let sup: Vec<f64> = times
            .iter()
            .map(|t| free_decay(1.0, 0.5, 1.0, *t) + 0.1 * (-(t - 1.0f64).powi(2) * 10.0).exp())
            .collect();
        let y = ScalarTrajectory::new(times, sup).unwrap();
        assert!(!comparison_check(&y, 1.0, 0.5, &Zero, 0.0, 1e-8));
    }

    #[test]
    fn young_examples() {
        assert_eq!(young_split(1.0, 0.6, 0.0).unwrap(), 0.0);
        assert!(young_split(1.0, 0.5, 1.0).is_err());
        // Minimization oracle for δ = 3/5, α = 1, f = 1: golden-section on ln y.
        let (alpha, delta, f) = (1.0, 0.6, 1.0);
        let g = young_split(alpha, delta, f).unwrap();
        let phi = |ly: f64| {
            let y = ly.exp();
            g + alpha * y.powf(delta) - 2.0 * f * y.sqrt()
        };
        let (mut lo, mut hi) = (-20.0f64, 20.0f64);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if phi(a) < phi(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let min = phi(0.5 * (lo + hi));
        assert!((-1e-12..=1e-9).contains(&min), "{min}");
    }

    #[test]
    fn young_inequality_sampled() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100_000 {
            let alpha = rng.random_range(0.05..5.0);
            let delta = rng.random_range(0.51..0.99);
            let f = rng.random_range(0.0..10.0);
            let y = rng.random_range(0.0..100.0);
            let g = young_split(alpha, delta, f).unwrap();
            let lhs = 2.0 * f * f64::sqrt(y);
            let rhs = g + alpha * f64::powf(y, delta);
            assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{lhs} > {rhs}");
        }
    }

    proptest! {
        #[test]
        fn nonnegativity_preserved(z0 in 0.0f64..5.0, c in 0.0f64..2.0, alpha in 0.1f64..3.0, delta in 0.2f64..0.95) {
            let g = PiecewiseConstant::new(vec![1.0], vec![c, 0.0]).unwrap();
            let z = solve_comparison(alpha, delta, &g, z0, 0.0, 3.0, 0.1).unwrap();
            prop_assert!(z.values.iter().all(|&v| v >= 0.0));
        }
    }
}
