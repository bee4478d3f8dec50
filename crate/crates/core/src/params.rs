//! Physical parameters, admissibility, and the constants of the extinction
//! estimates.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `e^{iθ}` as `(cos θ, sin θ)`.
///
/// All rotations in the crate go through this function so that
/// `rotation(θ).conj() * rotation(θ)` has an exactly zero imaginary part.
pub fn rotation(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

/// Membership in the admissibility cone
/// `C_θ(m) = { z : Re(z e^{iθ}) > 0 and 2√m Re(z e^{iθ}) ≥ |1−m| |Im(z e^{iθ})| }`.
///
/// Both comparisons are plain IEEE comparisons. In particular for `m = 0`
/// the imaginary part of `z e^{iθ}` must be exactly zero, which holds for
/// `z = s·rotation(θ).conj()` when `s` is a power of two but not, in
/// general, for other rounded multiples of `e^{-iθ}`.
pub fn in_c_theta(z: Complex64, theta: f64, m: f64) -> bool {
    let w = z * rotation(theta);
    w.re > 0.0 && 2.0 * m.sqrt() * w.re >= (1.0 - m).abs() * w.im.abs()
}

/// The exponent `δ = ((N+2) − m(N−2)) / (N(1−m)+4)`.
pub fn gn_delta(m: f64, dim: usize) -> f64 {
    let n = dim as f64;
    ((n + 2.0) - m * (n - 2.0)) / (n * (1.0 - m) + 4.0)
}

/// The exponent `λ = 2(1−δ) = 4(1−m) / (N(1−m)+4)`.
pub fn gn_lambda(m: f64, dim: usize) -> f64 {
    let n = dim as f64;
    4.0 * (1.0 - m) / (n * (1.0 - m) + 4.0)
}

/// The power `4 / (N(1−m)+4)` carried by the Gagliardo–Nirenberg constant.
pub fn gn_power(m: f64, dim: usize) -> f64 {
    4.0 / (dim as f64 * (1.0 - m) + 4.0)
}

/// Coefficients of the equation and the spatial dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub theta: f64,
    pub m: f64,
    pub p: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub gamma: Complex64,
    pub dim: usize,
}

impl PhysicalParams {
    /// Heat-type defaults: `θ = 0`, `a = 1`, `b = γ = 0`, `p = 3`.
    pub fn heat(m: f64, dim: usize) -> Self {
        Self {
            theta: 0.0,
            m,
            p: 3.0,
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            gamma: Complex64::new(0.0, 0.0),
            dim,
        }
    }

    pub fn rotation(&self) -> Complex64 {
        rotation(self.theta)
    }

    /// `a e^{iθ}`.
    pub fn rotated_a(&self) -> Complex64 {
        self.a * self.rotation()
    }

    /// `b e^{iθ}`.
    pub fn rotated_b(&self) -> Complex64 {
        self.b * self.rotation()
    }

    /// `γ e^{iθ}`.
    pub fn rotated_gamma(&self) -> Complex64 {
        self.gamma * self.rotation()
    }

    /// `Re(a e^{iθ})`, the rate of the singular damping.
    pub fn damping_rate(&self) -> f64 {
        self.rotated_a().re
    }

    /// Checks every admissibility condition and reports all failures at once.
    pub fn validate(&self) -> Result<(), ViolationReport> {
        let mut violations = Vec::new();
        let finite = self.theta.is_finite()
            && self.m.is_finite()
            && self.p.is_finite()
            && [self.a, self.b, self.gamma]
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            violations.push(Violation::NonFinite);
            return Err(ViolationReport { violations });
        }
        if self.dim == 0 {
            violations.push(Violation::Dimension { dim: self.dim });
        }
        let theta_ok = self.theta > -FRAC_PI_2 && self.theta < FRAC_PI_2;
        if !theta_ok {
            violations.push(Violation::ThetaOutOfRange { theta: self.theta });
        }
        if !(0.0..=1.0).contains(&self.m) {
            violations.push(Violation::MOutOfRange { m: self.m });
        }
        if self.p <= 1.0 {
            violations.push(Violation::POutOfRange { p: self.p });
        }
        // Cone tests are only meaningful on the closed range of θ.
        if self.theta.abs() <= FRAC_PI_2 {
            if self.m >= 0.0 && !in_c_theta(self.a, self.theta, self.m) {
                violations.push(Violation::ANotInCone { a: self.a });
            }
            let b_zero = self.b.re == 0.0 && self.b.im == 0.0;
            if !b_zero && !in_c_theta(self.b, self.theta, self.p) {
                violations.push(Violation::BNotInCone { b: self.b });
            }
            if self.rotated_gamma().re < 0.0 {
                violations.push(Violation::GammaNotDissipative { gamma: self.gamma });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ViolationReport { violations })
        }
    }
}

/// One failed admissibility condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    NonFinite,
    Dimension { dim: usize },
    ThetaOutOfRange { theta: f64 },
    MOutOfRange { m: f64 },
    POutOfRange { p: f64 },
    ANotInCone { a: Complex64 },
    BNotInCone { b: Complex64 },
    GammaNotDissipative { gamma: Complex64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite => write!(f, "parameters must be finite"),
            Violation::Dimension { dim } => write!(f, "spatial dimension must be positive, got {dim}"),
            Violation::ThetaOutOfRange { theta } => write!(
                f,
                "theta out of range: admissible parameters need -pi/2 < theta < pi/2, got {theta}"
            ),
            Violation::MOutOfRange { m } => write!(f, "m must lie in [0, 1], got {m}"),
            Violation::POutOfRange { p } => write!(f, "p must be greater than 1, got {p}"),
            Violation::ANotInCone { a } => write!(f, "a ∉ C_θ(m): a = {a}"),
            Violation::BNotInCone { b } => write!(f, "b ∉ C_θ(p) ∪ {{0}}: b = {b}"),
            Violation::GammaNotDissipative { gamma } => {
                write!(f, "Re(γ e^{{iθ}}) must be nonnegative: γ = {gamma}")
            }
        }
    }
}

/// All admissibility failures of a parameter set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn contains(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ViolationReport {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("invalid parameters: {0}")]
    Invalid(#[from] ViolationReport),
    #[error("m = 1 has no finite-time extinction constants (division by 1 - m)")]
    UnitExponent,
    #[error("the Gagliardo-Nirenberg constant must be positive and finite, got {0}")]
    BadConstant(f64),
    #[error("forcing bound {f_sup} must be nonnegative and finite")]
    BadForcingBound { f_sup: f64 },
    #[error("a nonzero forcing bound after T0 is only admissible for m = 0, got m = {m}")]
    ForcingNeedsSaturation { m: f64 },
    #[error("forcing bound {f_sup} must be strictly below Re(a e^{{iθ}}) = {rate}")]
    ForcingExceedsDamping { f_sup: f64, rate: f64 },
    #[error("T0 must be nonnegative and finite, got {0}")]
    BadT0(f64),
    #[error("envelope evaluated at t = {t} before T0 = {t0}")]
    BeforeT0 { t: f64, t0: f64 },
}

/// Constants of the extinction estimates for one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub m: f64,
    pub dim: usize,
    pub delta: f64,
    pub lambda: f64,
    /// `4/(N(1−m)+4)`.
    pub gn_power: f64,
    /// `M = min{cos θ, Re(a e^{iθ}) − f_sup}`.
    pub big_m: f64,
    /// Envelope rate `M · C_GN^{−4/(N(1−m)+4)}`.
    pub alpha: f64,
    /// Rate used by the scheduled-extinction construction,
    /// `min{cos θ, Re(a e^{iθ})} · C_GN^{−4/(N(1−m)+4)}`.
    pub alpha_schedule: f64,
    pub eps_star: f64,
    pub c_gn: f64,
    pub t0: f64,
}

/// Builds the constants for `m < 1`.
///
/// `f_sup` is the sup-norm of the forcing after `t0`; it must be zero unless
/// `m = 0`, and then strictly below `Re(a e^{iθ})`.
pub fn derived_constants(
    params: &PhysicalParams,
    c_gn: f64,
    f_sup: f64,
    t0: f64,
) -> Result<DerivedConstants, ParamsError> {
    params.validate()?;
    if params.m >= 1.0 {
        return Err(ParamsError::UnitExponent);
    }
    if !(c_gn.is_finite() && c_gn > 0.0) {
        return Err(ParamsError::BadConstant(c_gn));
    }
    if !(f_sup.is_finite() && f_sup >= 0.0) {
        return Err(ParamsError::BadForcingBound { f_sup });
    }
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(ParamsError::BadT0(t0));
    }
    let rate = params.damping_rate();
    if f_sup > 0.0 {
        if params.m != 0.0 {
            return Err(ParamsError::ForcingNeedsSaturation { m: params.m });
        }
        if f_sup >= rate {
            return Err(ParamsError::ForcingExceedsDamping { f_sup, rate });
        }
    }
    let (m, dim) = (params.m, params.dim);
    let delta = gn_delta(m, dim);
    let lambda = gn_lambda(m, dim);
    let power = gn_power(m, dim);
    let cos = params.theta.cos();
    let big_m = cos.min(rate - f_sup);
    let scale = c_gn.powf(-power);
    let alpha = big_m * scale;
    let alpha_schedule = cos.min(rate) * scale;
    Ok(DerivedConstants {
        m,
        dim,
        delta,
        lambda,
        gn_power: power,
        big_m,
        alpha,
        alpha_schedule,
        eps_star: eps_star(alpha_schedule, delta),
        c_gn,
        t0,
    })
}

/// Largest admissible schedule amplitude for a given rate and exponent:
/// `min{ (2δ−1)^{−(2δ−1)/δ} (αδ)^{1/(1−δ)} (1−δ)^{(2δ−1)/(δ(1−δ))}, αδ(1−δ) }`.
pub fn eps_star(alpha: f64, delta: f64) -> f64 {
    let e = 2.0 * delta - 1.0;
    let first = e.powf(-e / delta)
        * (alpha * delta).powf(1.0 / (1.0 - delta))
        * (1.0 - delta).powf(e / (delta * (1.0 - delta)));
    first.min(alpha * delta * (1.0 - delta))
}

impl DerivedConstants {
    /// `(2δ−1)/(1−δ)`, the exponent of the forcing schedule.
    pub fn schedule_exponent(&self) -> f64 {
        (2.0 * self.delta - 1.0) / (1.0 - self.delta)
    }

    /// Closed form of the same exponent, `(N(1−m)+4m) / (2(1−m))`.
    pub fn schedule_exponent_closed_form(&self) -> f64 {
        let n = self.dim as f64;
        (n * (1.0 - self.m) + 4.0 * self.m) / (2.0 * (1.0 - self.m))
    }

    /// Upper bound on the L² norm at time `t ≥ t0` given the norm at `t0`:
    /// `(‖u(T₀)‖^λ − λα(t−T₀))₊^{1/λ}`, exactly zero past the root.
    pub fn envelope(&self, t: f64, mass_at_t0: f64) -> Result<f64, ParamsError> {
        if t < self.t0 {
            return Err(ParamsError::BeforeT0 { t, t0: self.t0 });
        }
        if t == self.t0 || mass_at_t0 == 0.0 {
            return Ok(mass_at_t0);
        }
        let inner = mass_at_t0.powf(self.lambda) - self.lambda * self.alpha * (t - self.t0);
        Ok(if inner <= 0.0 {
            0.0
        } else {
            inner.powf(1.0 / self.lambda)
        })
    }

    /// Time by which the solution is guaranteed to vanish:
    /// `C_GN^{4/(N(1−m)+4)} ‖u(T₀)‖^λ / (λM) + T₀`.
    pub fn extinction_bound(&self, mass_at_t0: f64) -> f64 {
        mass_at_t0.powf(self.lambda) / (self.lambda * self.alpha) + self.t0
    }

    /// Largest initial L² norm compatible with a schedule ending at `t0`:
    /// `‖u₀‖^{2(1−δ)} ≤ ε★ T₀`.
    pub fn max_initial_mass(&self) -> f64 {
        (self.eps_star * self.t0).powf(1.0 / (2.0 * (1.0 - self.delta)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cone_examples() {
        for theta in [-1.2, -0.3, 0.0, 0.7, 1.5] {
            assert!(in_c_theta(rotation(theta).conj(), theta, 0.0));
            assert!(!in_c_theta(c(0.0, 1.0) * rotation(theta).conj(), theta, 0.0));
            let z = c(1.0, 1e6) * rotation(theta).conj();
            assert!(in_c_theta(z, theta, 1.0));
        }
    }

    #[test]
    fn cone_boundary_is_closed() {
        // m = 1/4: 2·(1/2)·Re = Re must be ≥ (3/4)|Im|. Re = 3, Im = 4 sits on the edge.
        assert!(in_c_theta(c(3.0, 4.0), 0.0, 0.25));
        assert!(!in_c_theta(c(3.0, 4.000001), 0.0, 0.25));
        assert!(!in_c_theta(c(0.0, 0.0), 0.0, 1.0));
    }

    #[test]
    fn validate_examples() {
        let ok = PhysicalParams::heat(0.0, 1);
        assert!(ok.validate().is_ok());

        let mut bad_a = ok.clone();
        bad_a.a = c(0.0, 1.0);
        let report = bad_a.validate().unwrap_err();
        assert!(report.contains(|v| matches!(v, Violation::ANotInCone { .. })));
        assert!(report.to_string().contains("a ∉ C_θ(m)"));

        let mut bad_theta = ok.clone();
        bad_theta.theta = FRAC_PI_2;
        let report = bad_theta.validate().unwrap_err();
        assert!(report.contains(|v| matches!(v, Violation::ThetaOutOfRange { .. })));
        assert!(report.to_string().contains("theta out of range"));
    }

    #[test]
    fn validate_reports_every_violation() {
        let p = PhysicalParams {
            theta: 0.0,
            m: 1.5,
            p: 0.5,
            a: c(-1.0, 0.0),
            b: c(-1.0, 0.0),
            gamma: c(-1.0, 0.0),
            dim: 1,
        };
        let report = p.validate().unwrap_err();
        assert_eq!(report.violations.len(), 5, "{report}");
    }

    #[test]
    fn delta_lambda_examples() {
        assert_relative_eq!(gn_delta(0.0, 1), 0.6, epsilon = 1e-15);
        assert_relative_eq!(gn_lambda(0.0, 1), 0.8, epsilon = 1e-15);
        assert_relative_eq!(gn_delta(0.0, 2), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(gn_lambda(0.0, 2), 2.0 / 3.0, epsilon = 1e-15);
        let k = derived_constants(&PhysicalParams::heat(0.0, 2), 1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(k.schedule_exponent(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(k.schedule_exponent_closed_form(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn canonical_constants_and_bound() {
        let k = derived_constants(&PhysicalParams::heat(0.0, 1), 1.0, 0.0, 0.5).unwrap();
        assert_eq!(k.big_m, 1.0);
        assert_eq!(k.alpha, 1.0);
        // ‖u(T₀)‖^{4/5} / (λ M) + T₀ with ‖u(T₀)‖ = 2.
        let expect = 2f64.powf(0.8) / 0.8 + 0.5;
        assert_relative_eq!(k.extinction_bound(2.0), expect, max_relative = 1e-15);
        assert_eq!(k.envelope(k.extinction_bound(2.0) + 1e-9, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn envelope_examples() {
        let k = derived_constants(&PhysicalParams::heat(0.0, 1), 1.0, 0.0, 0.0).unwrap();
        assert_eq!(k.envelope(0.0, 0.7).unwrap(), 0.7);
        assert_eq!(k.envelope(3.0, 0.0).unwrap(), 0.0);
        assert!(k.envelope(1.25 - 1e-9, 1.0).unwrap() > 0.0);
        assert_eq!(k.envelope(1.25, 1.0).unwrap(), 0.0);
        assert_eq!(k.envelope(7.0, 1.0).unwrap(), 0.0);
        assert!(matches!(k.envelope(-1.0, 1.0), Err(ParamsError::BeforeT0 { .. })));
        // Inner expression: 1 - 0.8 t, raised to 5/4.
        assert_relative_eq!(k.envelope(0.5, 1.0).unwrap(), 0.6f64.powf(1.25), max_relative = 1e-14);
    }

    #[test]
    fn unit_exponent_is_typed_error() {
        let p = PhysicalParams::heat(1.0, 1);
        assert_eq!(derived_constants(&p, 1.0, 0.0, 0.0), Err(ParamsError::UnitExponent));
    }

    #[test]
    fn forcing_bound_rules() {
        let p = PhysicalParams::heat(0.0, 1);
        assert!(derived_constants(&p, 1.0, 0.5, 0.0).is_ok());
        assert!(matches!(
            derived_constants(&p, 1.0, 1.0, 0.0),
            Err(ParamsError::ForcingExceedsDamping { .. })
        ));
        let q = PhysicalParams::heat(0.5, 1);
        assert!(matches!(
            derived_constants(&q, 1.0, 0.1, 0.0),
            Err(ParamsError::ForcingNeedsSaturation { .. })
        ));
        let k = derived_constants(&p, 1.0, 0.5, 0.0).unwrap();
        assert_eq!(k.big_m, 0.5);
        assert_eq!(k.alpha_schedule, 1.0);
    }

    #[test]
    fn eps_star_makes_young_bound_meet_schedule() {
        // With ‖f‖² = ε★ s^{(2δ−1)/(1−δ)}, the Young majorant of the forcing must
        // stay below z★ s^{δ/(1−δ)} where z★ = (αδ^δ(1−δ))^{1/(1−δ)}.
        for (alpha, delta) in [(1.0, 0.6), (0.3, 2.0 / 3.0), (2.5, 0.55), (0.8, 0.9)] {
            let eps = eps_star(alpha, delta);
            let z_star = (alpha * delta.powf(delta) * (1.0 - delta)).powf(1.0 / (1.0 - delta));
            let young = (2.0 * delta - 1.0) / delta
                * (alpha * delta).powf(-1.0 / (2.0 * delta - 1.0))
                * eps.powf(delta / (2.0 * delta - 1.0));
            assert!(young <= z_star * (1.0 + 1e-12), "α={alpha} δ={delta}");
            assert!(eps <= alpha * delta * (1.0 - delta));
        }
    }
}
