//! Source terms `f(t, x)`.
//!
//! Every non-feedback profile factors as `envelope(t) · shape(x)` for a
//! fixed shape sampled on the simulation grid. The kind records which
//! hypothesis of the extinction theory the profile is meant to satisfy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::field::{ComplexField, Grid};
use crate::params::{DerivedConstants, PhysicalParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForcingError {
    #[error("bang-bang forcing needs the current state")]
    MissingState,
    #[error("state lives on a different grid than the forcing")]
    GridMismatch,
    #[error("schedule amplitude {eps} exceeds the admissible threshold {eps_star}")]
    EpsTooLarge { eps: f64, eps_star: f64 },
    #[error("schedule amplitude must be positive, got {0}")]
    BadEps(f64),
    #[error("forcing shape must be nonzero")]
    ZeroShape,
    #[error("sup of |f| after T0 is {sup}, which must be strictly below Re(a e^{{iθ}}) = {rate}")]
    NotBounded { sup: f64, rate: f64 },
    #[error("the sup-bounded hypothesis is only available for m = 0, got m = {0}")]
    NeedsSaturation(f64),
    #[error("invalid profile parameter: {0}")]
    Parameter(String),
}

/// Time modulation of a shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeEnvelope {
    Constant,
    /// `e^{−rate·t}`.
    Exponential { rate: f64 },
    /// `cos(ω t)`.
    Cosine { omega: f64 },
}

impl TimeEnvelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeEnvelope::Constant => 1.0,
            TimeEnvelope::Exponential { rate } => (-rate * t).exp(),
            TimeEnvelope::Cosine { omega } => (omega * t).cos(),
        }
    }

    /// `sup_{t > t0} |value(t)|`.
    pub fn sup_after(&self, t0: f64) -> f64 {
        match *self {
            TimeEnvelope::Constant | TimeEnvelope::Cosine { .. } => 1.0,
            TimeEnvelope::Exponential { rate } if rate >= 0.0 => (-rate * t0).exp(),
            TimeEnvelope::Exponential { .. } => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingKind {
    Zero,
    /// No hypothesis attached.
    Free,
    /// Identically zero for `t > t0`.
    Cutoff { t0: f64 },
    /// `sup_{t>t0} |f| < Re(a e^{iθ})`; only meaningful for `m = 0`.
    Bounded { t0: f64 },
    /// `‖f(t)‖² = eps (t0 − t)₊^exponent` with a unit-norm shape.
    Scheduled { t0: f64, eps: f64, exponent: f64 },
    /// Feedback `−iμ u/|u|`, zero where `u = 0`.
    BangBang { mu: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForcingProfile {
    kind: ForcingKind,
    envelope: TimeEnvelope,
    grid: Grid,
    shape: Option<ComplexField>,
}

impl ForcingProfile {
    pub fn zero(grid: Grid) -> Self {
        Self {
            kind: ForcingKind::Zero,
            envelope: TimeEnvelope::Constant,
            grid,
            shape: None,
        }
    }

    pub fn free(shape: ComplexField, envelope: TimeEnvelope) -> Self {
        Self::with_shape(ForcingKind::Free, shape, envelope)
    }

    pub fn cutoff(shape: ComplexField, envelope: TimeEnvelope, t0: f64) -> Result<Self, ForcingError> {
        check_time(t0)?;
        Ok(Self::with_shape(ForcingKind::Cutoff { t0 }, shape, envelope))
    }

    /// Sup-bounded profile; rejected unless `sup_{t>t0} |f| < Re(a e^{iθ})` and `m = 0`.
    pub fn bounded(
        shape: ComplexField,
        envelope: TimeEnvelope,
        t0: f64,
        params: &PhysicalParams,
    ) -> Result<Self, ForcingError> {
        check_time(t0)?;
        let profile = Self::with_shape(ForcingKind::Bounded { t0 }, shape, envelope);
        profile.check_bounded(params)?;
        Ok(profile)
    }

    pub fn bang_bang(grid: Grid, mu: f64) -> Result<Self, ForcingError> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(ForcingError::Parameter(format!("mu must be nonnegative, got {mu}")));
        }
        Ok(Self {
            kind: ForcingKind::BangBang { mu },
            envelope: TimeEnvelope::Constant,
            grid,
            shape: None,
        })
    }

    fn with_shape(kind: ForcingKind, shape: ComplexField, envelope: TimeEnvelope) -> Self {
        Self {
            kind,
            envelope,
            grid: *shape.grid(),
            shape: Some(shape),
        }
    }

    pub fn kind(&self) -> ForcingKind {
        self.kind
    }

    pub fn envelope(&self) -> TimeEnvelope {
        self.envelope
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> Option<&ComplexField> {
        self.shape.as_ref()
    }

    pub fn feedback_gain(&self) -> Option<f64> {
        match self.kind {
            ForcingKind::BangBang { mu } => Some(mu),
            _ => None,
        }
    }

    /// Scalar time factor multiplying the shape (0 for zero and feedback kinds).
    pub fn amplitude(&self, t: f64) -> f64 {
        match self.kind {
            ForcingKind::Zero | ForcingKind::BangBang { .. } => 0.0,
            ForcingKind::Free | ForcingKind::Bounded { .. } => self.envelope.value(t),
            ForcingKind::Cutoff { t0 } => {
                if t > t0 {
                    0.0
                } else {
                    self.envelope.value(t)
                }
            }
            ForcingKind::Scheduled { t0, eps, exponent } => schedule_amplitude(eps, exponent, t0, t),
        }
    }

    /// True when the non-feedback part of `f(t, ·)` is exactly zero.
    pub fn vanishes_at(&self, t: f64) -> bool {
        self.amplitude(t) == 0.0
    }

    /// Times where the profile may be discontinuous in `t`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            ForcingKind::Cutoff { t0 } | ForcingKind::Scheduled { t0, .. } => vec![t0],
            _ => Vec::new(),
        }
    }

    /// `f(t, ·)`. Feedback profiles need the current state.
    pub fn eval(&self, t: f64, state: Option<&ComplexField>) -> Result<ComplexField, ForcingError> {
        if let ForcingKind::BangBang { mu } = self.kind {
            let u = state.ok_or(ForcingError::MissingState)?;
            if *u.grid() != self.grid {
                return Err(ForcingError::GridMismatch);
            }
            let mut out = u.clone();
            exec::for_each_mut(out.values_mut(), |_, z| *z = bang_bang_value(*z, mu));
            return Ok(out);
        }
        let amp = self.amplitude(t);
        match &self.shape {
            Some(shape) if amp != 0.0 => Ok(shape.scaled(Complex64::new(amp, 0.0))),
            _ => Ok(ComplexField::zeros(self.grid)),
        }
    }

    /// `‖f(t)‖_{L²}` for non-feedback kinds.
    pub fn l2_at(&self, t: f64) -> f64 {
        match &self.shape {
            Some(shape) => self.amplitude(t).abs() * shape.mass_l2(),
            None => 0.0,
        }
    }

    /// `sup_{t > t0, x} |f(t,x)|` from the envelope bound (∞ for feedback).
    pub fn sup_after(&self, t0: f64) -> f64 {
        let shape_sup = self.shape.as_ref().map_or(0.0, |s| s.sup_norm());
        match self.kind {
            ForcingKind::Zero => 0.0,
            ForcingKind::BangBang { mu } => mu,
            ForcingKind::Cutoff { t0: c } if t0 >= c => 0.0,
            ForcingKind::Scheduled { t0: c, eps, exponent } => {
                if t0 >= c {
                    0.0
                } else {
                    shape_sup * schedule_amplitude(eps, exponent, c, t0)
                }
            }
            _ => shape_sup * self.envelope.sup_after(t0),
        }
    }

    fn check_bounded(&self, params: &PhysicalParams) -> Result<(), ForcingError> {
        if params.m != 0.0 {
            return Err(ForcingError::NeedsSaturation(params.m));
        }
        let ForcingKind::Bounded { t0 } = self.kind else {
            return Ok(());
        };
        let sup = self.sup_after(t0);
        let rate = params.damping_rate();
        if sup < rate {
            Ok(())
        } else {
            Err(ForcingError::NotBounded { sup, rate })
        }
    }
}

/// `−iμ u/|u|`, and 0 at `u = 0`.
pub fn bang_bang_value(u: Complex64, mu: f64) -> Complex64 {
    let r = u.norm();
    if r == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, -mu) * (u / r)
    }
}

fn schedule_amplitude(eps: f64, exponent: f64, t0: f64, t: f64) -> f64 {
    let s = t0 - t;
    if s <= 0.0 {
        0.0
    } else {
        (eps * s.powf(exponent)).sqrt()
    }
}

fn check_time(t0: f64) -> Result<(), ForcingError> {
    if t0.is_finite() && t0 >= 0.0 {
        Ok(())
    } else {
        Err(ForcingError::Parameter(format!("t0 must be nonnegative, got {t0}")))
    }
}

/// A scheduled profile together with the largest admissible initial norm.
#[derive(Clone, Debug)]
pub struct ScheduledForcing {
    pub profile: ForcingProfile,
    /// `(ε★ T₀)^{1/(2(1−δ))}`.
    pub max_initial_mass: f64,
}

/// Builds `f(t,x) = g(t)·shape(x)` with `g(t)² = eps (T₀−t)₊^{(2δ−1)/(1−δ)}`.
///
/// The shape is normalized to unit discrete L² norm. `eps` defaults to ε★.
pub fn scheduled_profile(
    params: &PhysicalParams,
    k: &DerivedConstants,
    shape: &ComplexField,
    eps: Option<f64>,
) -> Result<ScheduledForcing, ForcingError> {
    if params.m >= 1.0 {
        return Err(ForcingError::Parameter("scheduled forcing needs m < 1".into()));
    }
    let eps = eps.unwrap_or(k.eps_star);
    if !(eps.is_finite() && eps > 0.0) {
        return Err(ForcingError::BadEps(eps));
    }
    if eps > k.eps_star {
        return Err(ForcingError::EpsTooLarge {
            eps,
            eps_star: k.eps_star,
        });
    }
    let norm = shape.mass_l2();
    if norm == 0.0 {
        return Err(ForcingError::ZeroShape);
    }
    let unit = shape.scaled(Complex64::new(1.0 / norm, 0.0));
    let profile = ForcingProfile::with_shape(
        ForcingKind::Scheduled {
            t0: k.t0,
            eps,
            exponent: k.schedule_exponent(),
        },
        unit,
        TimeEnvelope::Constant,
    );
    Ok(ScheduledForcing {
        profile,
        max_initial_mass: k.max_initial_mass(),
    })
}

/// Outcome of [`check_profile`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileCheck {
    pub holds: bool,
    /// Largest sampled excess over the hypothesis (negative means slack).
    pub max_violation: f64,
    pub condition: String,
    pub samples: usize,
}

const CHECK_SAMPLES: usize = 4096;

/// Verifies the kind-specific hypothesis by dense sampling in time.
/// `k` is only consulted for scheduled profiles.
pub fn check_profile(profile: &ForcingProfile, params: &PhysicalParams, k: Option<&DerivedConstants>) -> ProfileCheck {
    let ok = |condition: &str| ProfileCheck {
        holds: true,
        max_violation: 0.0,
        condition: condition.into(),
        samples: 0,
    };
    match profile.kind {
        ForcingKind::Zero => ok("zero forcing"),
        ForcingKind::Free => ok("no hypothesis"),
        ForcingKind::BangBang { .. } => ok("feedback forcing"),
        ForcingKind::Cutoff { t0 } => {
            let times = sample_times_after(t0);
            let worst = times
                .iter()
                .map(|&t| profile.eval(t, None).map(|f| f.sup_norm()).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            ProfileCheck {
                holds: worst == 0.0,
                max_violation: worst,
                condition: format!("f(t) = 0 for t > {t0}"),
                samples: times.len(),
            }
        }
        ForcingKind::Bounded { t0 } => {
            let rate = params.damping_rate();
            let condition = format!("sup |f| < Re(a e^(i theta)) = {rate} for t > {t0}");
            if params.m != 0.0 {
                return ProfileCheck {
                    holds: false,
                    max_violation: f64::INFINITY,
                    condition: format!("{condition}; requires m = 0, got m = {}", params.m),
                    samples: 0,
                };
            }
            let times = sample_times_after(t0);
            let worst = times
                .iter()
                .map(|&t| profile.eval(t, None).map(|f| f.sup_norm()).unwrap_or(f64::INFINITY) - rate)
                .fold(f64::NEG_INFINITY, f64::max);
            // The envelope bound covers the unsampled tail.
            let analytic = profile.sup_after(t0) - rate;
            let worst = worst.max(analytic);
            ProfileCheck {
                holds: worst < 0.0,
                max_violation: worst,
                condition,
                samples: times.len(),
            }
        }
        ForcingKind::Scheduled { t0, eps, exponent } => {
            let Some(k) = k else {
                return ProfileCheck {
                    holds: false,
                    max_violation: f64::INFINITY,
                    condition: "scheduled profile needs extinction constants".into(),
                    samples: 0,
                };
            };
            let horizon = 2.0 * t0.max(1.0);
            let times: Vec<f64> = (0..=CHECK_SAMPLES)
                .map(|i| horizon * i as f64 / CHECK_SAMPLES as f64)
                .collect();
            let limit = |t: f64| k.eps_star * (t0 - t).max(0.0).powf(exponent);
            let mut worst = f64::NEG_INFINITY;
            for &t in &times {
                let f = profile.l2_at(t);
                // Squaring the square root costs a few ulps.
                let excess = f * f - limit(t) * (1.0 + 1e-12);
                worst = worst.max(excess);
            }
            let eps_ok = eps <= k.eps_star;
            ProfileCheck {
                holds: eps_ok && worst <= 0.0,
                max_violation: if eps_ok { worst } else { eps - k.eps_star },
                condition: format!(
                    "|f(t)|^2 <= eps_star (T0 - t)_+^{exponent} with eps = {eps} <= eps_star = {}",
                    k.eps_star
                ),
                samples: times.len(),
            }
        }
    }
}

fn sample_times_after(t0: f64) -> Vec<f64> {
    let horizon = t0 + 2.0 * t0.max(1.0);
    let mut times: Vec<f64> = (1..=CHECK_SAMPLES)
        .map(|i| t0 + (horizon - t0) * i as f64 / CHECK_SAMPLES as f64)
        .collect();
    let just_after = t0 + f64::EPSILON * t0.abs().max(1.0);
    times.insert(0, just_after);
    times
}
