//! Adaptive Dormand–Prince 5(4) stepper shared by the pointwise damping
//! flow and the comparison ODE.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub(crate) trait State: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(&self) -> f64;
}

impl State for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl State for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

pub(crate) enum Hook<T> {
    Continue,
    /// Stop and report this value at the end of the interval.
    Finish(T),
    /// Stop here and return the current state as a [`Failure`].
    Yield,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Failure<T> {
    pub t: f64,
    pub y: T,
    pub h: f64,
}

pub(crate) struct Solution<T> {
    pub y: T,
    pub h_last: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
///
/// `admissible` can veto a proposed value (the step is then halved) or
/// project it in place.
/// `hook` runs at the start and after every accepted step.
pub(crate) fn integrate<T, F, A, H>(
    mut f: F,
    t0: f64,
    y0: T,
    t1: f64,
    opts: &Options,
    mut admissible: A,
    mut hook: H,
) -> Result<Solution<T>, Failure<T>>
where
    T: State,
    F: FnMut(f64, T) -> T,
    A: FnMut(&mut T) -> bool,
    H: FnMut(f64, &T) -> Hook<T>,
{
    let mut t = t0;
    let mut y = y0;
    match hook(t, &y) {
        Hook::Continue => {}
        Hook::Finish(v) => return Ok(Solution { y: v, h_last: opts.h_init }),
        Hook::Yield => return Err(Failure { t, y, h: opts.h_init }),
    }
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(Solution { y, h_last: opts.h_init });
    }
    let mut h = opts.h_init.min(span);
    let mut k1 = f(t, y);
    let mut steps = 0;
    while t < t1 {
        steps += 1;
        if steps > opts.max_steps || h < opts.h_min {
            return Err(Failure { t, y, h });
        }
        let last = t + h >= t1;
        let h_step = if last { t1 - t } else { h };
        let k2 = f(t + C[1] * h_step, y + k1 * (A2[0] * h_step));
        let k3 = f(t + C[2] * h_step, y + (k1 * A3[0] + k2 * A3[1]) * h_step);
        let k4 = f(t + C[3] * h_step, y + (k1 * A4[0] + k2 * A4[1] + k3 * A4[2]) * h_step);
        let k5 = f(
            t + C[4] * h_step,
            y + (k1 * A5[0] + k2 * A5[1] + k3 * A5[2] + k4 * A5[3]) * h_step,
        );
        let k6 = f(
            t + C[5] * h_step,
            y + (k1 * A6[0] + k2 * A6[1] + k3 * A6[2] + k4 * A6[3] + k5 * A6[4]) * h_step,
        );
        let mut y_new = y + (k1 * B[0] + k3 * B[2] + k4 * B[3] + k5 * B[4] + k6 * B[5]) * h_step;
        if !admissible(&mut y_new) || !y_new.magnitude().is_finite() {
            h = 0.5 * h_step;
            continue;
        }
        let k7 = f(t + h_step, y_new);
        let err_vec = (k1 * E[0] + k3 * E[2] + k4 * E[3] + k5 * E[4] + k6 * E[5] + k7 * E[6]) * h_step;
        let scale = opts.atol + opts.rtol * y.magnitude().max(y_new.magnitude());
        let err = err_vec.magnitude() / scale;
        if err <= 1.0 {
            t = if last { t1 } else { t + h_step };
            y = y_new;
            k1 = k7;
            match hook(t, &y) {
                Hook::Continue => {}
                Hook::Finish(v) => return Ok(Solution { y: v, h_last: h_step }),
                Hook::Yield => return Err(Failure { t, y, h: h_step }),
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_step * grow;
        } else {
            h = h_step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(Solution { y, h_last: h })
}

/// Like [`integrate`], but whenever the explicit stepper stalls or the state
/// turns `stiff`, it takes `implicit(t, y, h)` steps of length `h_stiff`
/// until `stiff(y)` clears, then resumes explicit stepping.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_with_fallback<T, F, A, H, I, S>(
    mut f: F,
    t0: f64,
    y0: T,
    t1: f64,
    opts: &Options,
    mut admissible: A,
    mut hook: H,
    h_stiff: f64,
    mut implicit: I,
    mut stiff: S,
) -> Result<Solution<T>, Failure<T>>
where
    T: State,
    F: FnMut(f64, T) -> T,
    A: FnMut(&mut T) -> bool,
    H: FnMut(f64, &T) -> Hook<T>,
    I: FnMut(f64, T, f64) -> Option<T>,
    S: FnMut(&T) -> bool,
{
    let (mut t, mut y) = (t0, y0);
    let mut run = *opts;
    let mut explicit = !stiff(&y);
    loop {
        if explicit {
            let handoff = |t: f64, y: &T| match hook(t, y) {
                Hook::Continue if stiff(y) => Hook::Yield,
                other => other,
            };
            match integrate(&mut f, t, y, t1, &run, &mut admissible, handoff) {
                Ok(sol) => return Ok(sol),
                Err(fail) => (t, y) = (fail.t, fail.y),
            }
        }
        loop {
            match hook(t, &y) {
                Hook::Finish(v) => return Ok(Solution { y: v, h_last: h_stiff }),
                Hook::Continue | Hook::Yield => {}
            }
            let last = t + h_stiff >= t1;
            let h = if last { t1 - t } else { h_stiff };
            y = implicit(t, y, h).ok_or(Failure { t, y, h })?;
            if last {
                return Ok(Solution { y, h_last: h });
            }
            t += h;
            if !stiff(&y) {
                break;
            }
        }
        explicit = true;
        run.h_init = h_stiff;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options {
            rtol: 1e-11,
            atol: 1e-13,
            h_min: 1e-14,
            h_init: 0.1,
            max_steps: 100_000,
        }
    }

    #[test]
    fn exponential_decay() {
        let sol = integrate(|_, y: f64| -y, 0.0, 1.0, 3.0, &opts(), |_| true, |_, _| Hook::Continue).unwrap();
        assert!((sol.y - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn complex_rotation() {
        let i = Complex64::new(0.0, 1.0);
        let sol = integrate(
            |_, y: Complex64| i * y,
            0.0,
            Complex64::new(1.0, 0.0),
            2.0,
            &opts(),
            |_| true,
            |_, _| Hook::Continue,
        )
        .unwrap();
        assert!((sol.y - Complex64::from_polar(1.0, 2.0)).norm() < 1e-10);
    }

    #[test]
    fn fallback_takes_over_a_stiff_decay() {
        // y' = -k(y - 1) with k large: the explicit stepper gives up after a
        // few steps and backward Euler carries the solution to equilibrium.
        let k = 1e9;
        let o = Options { max_steps: 100, ..opts() };
        let sol = integrate_with_fallback(
            |_, y: f64| -k * (y - 1.0),
            0.0,
            2.0,
            1.0,
            &o,
            |_| true,
            |_, _| Hook::Continue,
            1e-3,
            |_, y, h| Some((y + h * k) / (1.0 + h * k)),
            |_| true,
        )
        .unwrap();
        assert!((sol.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hook_can_stop_early() {
        let sol = integrate(
            |_, _y: f64| -1.0,
            0.0,
            1.0,
            5.0,
            &opts(),
            |_| true,
            |t, _| if t > 0.0 { Hook::Finish(0.0) } else { Hook::Continue },
        )
        .unwrap();
        assert_eq!(sol.y, 0.0);
    }
}
