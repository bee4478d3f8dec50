//! The local part of the equation at a single grid point,
//!
//! ```text
//! u' = c − e^{iθ}(a|u|^{m−1}u + b|u|^{p−1}u + γu) − iμe^{iθ} u/|u|,
//! ```
//!
//! where `c = e^{iθ}f` is frozen over the substep and the last term is the
//! optional bang-bang feedback. Unit-modulus factors `u/|u|` are read as
//! `0` at `u = 0`.

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{PhysicalParams, ViolationReport};
use crate::rk;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DampingError {
    #[error("invalid parameters: {0}")]
    Invalid(#[from] ViolationReport),
    #[error("pointwise integrator stalled at local time {t:e} (step {h:e}) with u = {state}, started from u = {start}")]
    Underflow {
        start: Complex64,
        state: Complex64,
        t: f64,
        h: f64,
    },
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Rotated coefficients of the pointwise flow for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseFlow {
    m: f64,
    p: f64,
    ra: Complex64,
    rb: Complex64,
    rg: Complex64,
    /// Coefficient of `u/|u|`: `a e^{iθ} + iμe^{iθ}` when `m = 0`, else `iμe^{iθ}`.
    sat: Complex64,
    /// `iμe^{iθ}`.
    feedback: Complex64,
}

impl PointwiseFlow {
    /// Assumes `params` are valid.
    pub fn new(params: &PhysicalParams, feedback_gain: f64) -> Self {
        let rot = params.rotation();
        let feedback = Complex64::new(0.0, feedback_gain) * rot;
        let ra = params.rotated_a();
        let sat = if params.m == 0.0 { ra + feedback } else { feedback };
        Self {
            m: params.m,
            p: params.p,
            ra,
            rb: params.rotated_b(),
            rg: params.rotated_gamma(),
            sat,
            feedback,
        }
    }

    /// Right-hand side of the pointwise ODE.
    pub fn rhs(&self, u: Complex64, drive: Complex64) -> Complex64 {
        let rho = u.norm();
        if rho == 0.0 {
            return drive;
        }
        let e = u / rho;
        let mut g = drive - self.sat * e - self.rg * u;
        if self.m > 0.0 {
            g -= self.ra * (rho.powf(self.m) * e);
        }
        if self.rb != ZERO {
            g -= self.rb * (rho.powf(self.p) * e);
        }
        g
    }

    /// Advances one point by `dt` with a constant drive `c = e^{iθ}f`.
    pub fn advance(&self, u: Complex64, dt: f64, drive: Complex64) -> Result<Complex64, DampingError> {
        if dt == 0.0 {
            return Ok(u);
        }
        if u == ZERO {
            if drive == ZERO {
                return Ok(ZERO);
            }
            // With m = 0 a strong enough saturated term holds the point at
            // zero through the section value U = c/sat.
            if self.m == 0.0 && drive.norm() <= self.sat.re {
                return Ok(ZERO);
            }
        }
        if drive == ZERO && self.rg == ZERO && self.rb == ZERO && self.m < 1.0 {
            let single = if self.m == 0.0 {
                Some((self.sat, 0.0))
            } else if self.feedback == ZERO {
                Some((self.ra, self.m))
            } else {
                None
            };
            if let Some((k, q)) = single {
                if k.re > 0.0 {
                    return Ok(single_power_flow(u, dt, k, q));
                }
            }
        }
        if self.m == 1.0 && self.rb == ZERO && self.feedback == ZERO {
            let k = self.ra + self.rg;
            let decay = (-k * dt).exp();
            return Ok(u * decay + drive * ((1.0 - decay) / k));
        }
        self.integrate(u, dt, drive)
    }

    /// Upper bound on the time for `|u|` to reach zero, when the dynamics
    /// guarantee that zero is reached and then kept.
    fn extinction_time_bound(&self, rho: f64, drive: Complex64) -> Option<f64> {
        if self.m == 0.0 {
            let rate = self.sat.re - drive.norm();
            (rate > 0.0).then(|| rho / rate)
        } else if self.m < 1.0 && drive == ZERO && self.feedback.re >= 0.0 && self.ra.re > 0.0 {
            Some(rho.powf(1.0 - self.m) / ((1.0 - self.m) * self.ra.re))
        } else {
            None
        }
    }

    /// `|u|·|K(|u|)|` over `|u|`, where the damping reads `K(|u|)u`; a bound
    /// on the local Jacobian.
    fn stiffness(&self, rho: f64) -> f64 {
        let ra = if self.m > 0.0 { self.ra.norm() * rho.powf(self.m - 1.0) } else { 0.0 };
        let rb = if self.rb != ZERO { self.rb.norm() * self.p * rho.powf(self.p - 1.0) } else { 0.0 };
        self.sat.norm() / rho + ra + rb + self.rg.norm()
    }

    /// Backward Euler step `v + h·damping(v) = w`. Writing `v = r e`, this is
    /// `e Q(r) = w` with `Q(r) = r + h(sat + ra r^m + rb r^p + rg r)`, so `r`
    /// solves `|Q(r)| = |w|` and `e = w/Q(r)`.
    fn backward_euler(&self, w: Complex64, h: f64) -> Option<Complex64> {
        // Q(r) and Q'(r).
        let q = |r: f64| {
            let mut z = Complex64::new(r, 0.0) + (self.sat + self.rg * r) * h;
            let mut dz = Complex64::new(1.0, 0.0) + self.rg * h;
            if self.m > 0.0 && r > 0.0 {
                let rm = r.powf(self.m);
                z += self.ra * (h * rm);
                dz += self.ra * (h * self.m * rm / r);
            }
            if self.rb != ZERO && r > 0.0 {
                let rp = r.powf(self.p);
                z += self.rb * (h * rp);
                dz += self.rb * (h * self.p * rp / r);
            }
            (z, dz)
        };
        let target = w.norm();
        if !target.is_finite() {
            return None;
        }
        let target_sq = target * target;
        if q(0.0).0.norm_sqr() >= target_sq {
            return Some(ZERO);
        }
        // |Q(r)| ≥ Re Q(r) ≥ r − h|sat|, which brackets the root. Newton on
        // |Q|² − |w|², falling back to bisection when a step leaves the bracket.
        let (mut lo, mut hi) = (0.0, target + h * self.sat.norm());
        let mut r = hi;
        for _ in 0..100 {
            let (z, dz) = q(r);
            let phi = z.norm_sqr() - target_sq;
            if phi > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let slope = 2.0 * (z.conj() * dz).re;
            let newton = r - phi / slope;
            let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if phi == 0.0 || (next - r).abs() <= 4.0 * f64::EPSILON * r {
                r = next;
                break;
            }
            r = next;
        }
        if r <= 0.0 {
            return Some(ZERO);
        }
        let v = w * (r / q(r).0);
        v.is_finite().then_some(v)
    }

    fn integrate(&self, u: Complex64, dt: f64, drive: Complex64) -> Result<Complex64, DampingError> {
        let scale = u.norm() + drive.norm() * dt;
        let opts = rk::Options {
            rtol: 1e-11,
            atol: 1e-14 * scale + f64::MIN_POSITIVE,
            h_min: 1e-13 * dt,
            h_init: dt,
            max_steps: 20_000,
        };
        let h_stiff = dt / 16.0;
        let result = rk::integrate_with_fallback(
            |_, y| self.rhs(y, drive),
            0.0,
            u,
            dt,
            &opts,
            |_| true,
            |t, y| match self.extinction_time_bound(y.norm(), drive) {
                Some(tau) if tau <= dt - t => rk::Hook::Finish(ZERO),
                _ => rk::Hook::Continue,
            },
            h_stiff,
            |_, y, h| self.backward_euler(y + drive * h, h),
            |y| self.stiffness(y.norm()) * h_stiff > 2.0,
        );
        match result {
            Ok(sol) => Ok(sol.y),
            Err(fail) => Err(DampingError::Underflow {
                start: u,
                state: fail.y,
                t: fail.t,
                h: fail.h,
            }),
        }
    }
}

/// Exact flow of `u' = −k|u|^{q−1}u` for `q < 1` and `Re k > 0`:
/// `|u|^{1−q}` decreases linearly and the phase follows logarithmically.
fn single_power_flow(u: Complex64, dt: f64, k: Complex64, q: f64) -> Complex64 {
    let rho = u.norm();
    if rho == 0.0 {
        return ZERO;
    }
    let one_q = 1.0 - q;
    let s0 = if q == 0.0 { rho } else { rho.powf(one_q) };
    let s = s0 - one_q * k.re * dt;
    if s <= 0.0 {
        return ZERO;
    }
    let rho_new = if q == 0.0 { s } else { s.powf(1.0 / one_q) };
    let e = u / rho;
    if k.im == 0.0 {
        return e * rho_new;
    }
    let dphi = k.im / (one_q * k.re) * (s / s0).ln();
    e * Complex64::from_polar(rho_new, dphi)
}

/// One damping substep at a single point with no forcing.
pub fn damping_substep(u: Complex64, dt: f64, params: &PhysicalParams) -> Result<Complex64, DampingError> {
    params.validate()?;
    PointwiseFlow::new(params, 0.0).advance(u, dt, ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::rotation;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Classical RK4 on the polar form `ρ' = −Rρ^m − R_b ρ^p − R_γ ρ`,
    /// `φ' = −Iρ^{m−1} − I_b ρ^{p−1} − I_γ`.
    fn polar_rk4(params: &PhysicalParams, u: Complex64, dt: f64, steps: usize) -> Complex64 {
        let (ra, rb, rg) = (params.rotated_a(), params.rotated_b(), params.rotated_gamma());
        let (m, p) = (params.m, params.p);
        let f = |y: [f64; 2]| -> [f64; 2] {
            let r = y[0];
            [
                -ra.re * r.powf(m) - rb.re * r.powf(p) - rg.re * r,
                -ra.im * r.powf(m - 1.0) - rb.im * r.powf(p - 1.0) - rg.im,
            ]
        };
        let h = dt / steps as f64;
        let mut y = [u.norm(), u.arg()];
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for j in 0..2 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        Complex64::from_polar(y[0], y[1])
    }

    #[test]
    fn saturated_extinction_is_exact() {
        let p = PhysicalParams::heat(0.0, 1);
        assert_eq!(damping_substep(c(1.0, 0.0), 2.0, &p).unwrap(), ZERO);
        assert_eq!(damping_substep(c(1.0, 0.0), 1.0, &p).unwrap(), ZERO);
    }

    #[test]
    fn saturated_amplitude_only() {
        let p = PhysicalParams::heat(0.0, 1);
        for phi in [0.0, 0.4, 2.0, -2.9] {
            let out = damping_substep(Complex64::from_polar(2.0, phi), 1.0, &p).unwrap();
            assert!((out - Complex64::from_polar(1.0, phi)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_is_absorbing() {
        let p = PhysicalParams {
            b: c(0.3, 0.1),
            gamma: c(0.2, -0.4),
            ..PhysicalParams::heat(0.5, 2)
        };
        for dt in [1e-6, 0.1, 10.0] {
            assert_eq!(damping_substep(ZERO, dt, &p).unwrap(), ZERO);
        }
    }

    #[test]
    fn stiff_drive_settles_on_equilibrium() {
        // u' = c − |u|^{1/2} e: the state reaches |u| = c² long before dt and
        // the Jacobian there is of order 1/c.
        let flow = PointwiseFlow::new(&PhysicalParams::heat(0.5, 1), 0.0);
        let drive = c(1e-7, 0.0);
        let out = flow.advance(c(3e-7, 1e-8), 0.01, drive).unwrap();
        assert!((out - c(1e-14, 0.0)).norm() <= 1e-17, "{out}");
    }

    #[test]
    fn closed_form_matches_fine_rk_oracle() {
        let theta = 0.4;
        let params = PhysicalParams {
            theta,
            a: c(0.9, 0.3) * rotation(theta).conj(),
            ..PhysicalParams::heat(0.5, 1)
        };
        params.validate().unwrap();
        let u = c(0.8, -0.5);
        let dt = 0.2;
        let got = damping_substep(u, dt, &params).unwrap();
        let want = polar_rk4(&params, u, dt, 1000);
        assert!((got - want).norm() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn integrator_path_matches_fine_rk_oracle() {
        let theta = -0.3;
        let params = PhysicalParams {
            theta,
            a: c(1.0, 0.2) * rotation(theta).conj(),
            b: c(0.5, 0.1) * rotation(theta).conj(),
            gamma: c(0.3, 0.7),
            ..PhysicalParams::heat(0.5, 1)
        };
        params.validate().unwrap();
        let u = c(1.2, 0.4);
        let dt = 0.1;
        let got = damping_substep(u, dt, &params).unwrap();
        let want = polar_rk4(&params, u, dt, 1000);
        assert!((got - want).norm() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn linear_case_closed_form() {
        let params = PhysicalParams {
            a: c(0.7, 0.4),
            gamma: c(0.1, 0.0),
            ..PhysicalParams::heat(1.0, 1)
        };
        let u = c(0.3, 0.9);
        let got = damping_substep(u, 0.5, &params).unwrap();
        let want = u * (-(params.a + params.gamma) * 0.5).exp();
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn integrated_extinction_is_exact() {
        let params = PhysicalParams {
            b: c(1.0, 0.0),
            ..PhysicalParams::heat(0.5, 1)
        };
        // ρ' ≤ −√ρ: extinct before 2√0.25 = 1.
        assert_eq!(damping_substep(c(0.25, 0.0), 1.0, &params).unwrap(), ZERO);
        assert_ne!(damping_substep(c(0.25, 0.0), 0.1, &params).unwrap(), ZERO);
    }

    #[test]
    fn gauge_covariance() {
        let theta = 0.2;
        let params = PhysicalParams {
            theta,
            a: c(1.0, 0.3) * rotation(theta).conj(),
            b: c(0.4, 0.1),
            gamma: c(0.2, 0.0),
            ..PhysicalParams::heat(0.3, 1)
        };
        params.validate().unwrap();
        let u = c(0.6, 0.2);
        let base = damping_substep(u, 0.05, &params).unwrap();
        for phi in [0.5, 1.7, -2.2] {
            let r = Complex64::from_polar(1.0, phi);
            let rotated = damping_substep(r * u, 0.05, &params).unwrap();
            assert!((rotated - r * base).norm() < 1e-10);
        }
    }

    #[test]
    fn drive_leaves_zero_when_it_beats_saturation() {
        let params = PhysicalParams::heat(0.0, 1);
        let flow = PointwiseFlow::new(&params, 0.0);
        assert_eq!(flow.advance(ZERO, 0.1, c(0.5, 0.0)).unwrap(), ZERO);
        let out = flow.advance(ZERO, 0.1, c(3.0, 0.0)).unwrap();
        // u' = 3 − 1 once away from zero.
        assert!((out - c(0.2, 0.0)).norm() < 1e-9, "{out}");
    }

    #[test]
    fn weak_drive_still_extinguishes() {
        let params = PhysicalParams::heat(0.0, 1);
        let flow = PointwiseFlow::new(&params, 0.0);
        // ρ' ≤ −(1 − 0.5): extinct before t = 0.2.
        assert_eq!(flow.advance(c(0.1, 0.0), 0.25, c(0.0, 0.5)).unwrap(), ZERO);
    }

    #[test]
    fn feedback_on_the_saturated_term() {
        let params = PhysicalParams::heat(0.0, 1);
        let flow = PointwiseFlow::new(&params, 2.0);
        // θ = 0: u' = −(1 + 2i) u/|u|, amplitude decays like the unforced case.
        let out = flow.advance(c(1.0, 0.0), 0.5, ZERO).unwrap();
        assert!((out.norm() - 0.5).abs() < 1e-14);
        assert!((out.arg() - (-2.0 * (0.5f64 / 1.0).ln().abs())).abs() < 1e-13);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = PhysicalParams {
            theta: 2.0,
            ..PhysicalParams::heat(0.0, 1)
        };
        assert!(matches!(damping_substep(c(1.0, 0.0), 0.1, &p), Err(DampingError::Invalid(_))));
    }
}
