//! Lower estimates of the discrete Gagliardo–Nirenberg constant
//!
//! ```text
//! ‖u‖₂^{(N+2−m(N−2))/2} ≤ C_GN ‖u‖_{m+1}^{m+1} ‖∇u‖₂^{N(1−m)/2}
//! ```
//!
//! as a maximum of the ratio over a seeded probe family on the simulation
//! grid. Probe `i` depends only on `(seed, i)`, so enlarging the family
//! never lowers the estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::field::{ComplexField, Grid};
use crate::params::{gn_delta, gn_power};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GnError {
    #[error("m must lie in [0, 1], got {0}")]
    M(f64),
    #[error("probe family must be nonempty")]
    EmptyFamily,
    #[error("the ratio is undefined for a field with zero gradient")]
    ZeroField,
    #[error("constant must be positive and finite, got {0}")]
    BadConstant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Gaussian,
    Bump,
    Eigenmodes,
    RandomSmooth,
}

/// Enough to regenerate a probe with [`probe`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeDescriptor {
    pub seed: u64,
    pub index: u64,
    pub kind: ProbeKind,
    /// Overall amplitude factor applied to the probe.
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnEstimate {
    pub m: f64,
    pub dim: usize,
    pub grid: Grid,
    pub c_gn: f64,
    pub family_size: usize,
    pub seed: u64,
    pub worst: ProbeDescriptor,
}

/// `‖u‖₂^{(N+2−m(N−2))/2} / (‖u‖_{m+1}^{m+1} ‖∇u‖₂^{N(1−m)/2})`.
pub fn gn_ratio(u: &ComplexField, m: f64) -> Result<f64, GnError> {
    if !(0.0..=1.0).contains(&m) {
        return Err(GnError::M(m));
    }
    let n = u.grid().dim as f64;
    let grad_sq = u.grad_norm_sq();
    if grad_sq == 0.0 {
        return Err(GnError::ZeroField);
    }
    let mass = u.mass_l2();
    let lm1 = u.lq_power(m + 1.0);
    let top = mass.powf((n + 2.0 - m * (n - 2.0)) / 2.0);
    let bottom = lm1 * grad_sq.powf(n * (1.0 - m) / 4.0);
    Ok(top / bottom)
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    grid: &'a Grid,
}

impl Sampler<'_> {
    fn phase(&mut self) -> Complex64 {
        Complex64::from_polar(1.0, self.rng.random_range(-PI..PI))
    }

    fn center(&mut self) -> Vec<f64> {
        let l = self.grid.half_width;
        (0..self.grid.dim).map(|_| self.rng.random_range(-0.6 * l..0.6 * l)).collect()
    }

    fn widths(&mut self, min_cells: f64) -> Vec<f64> {
        let h = self.grid.spacing();
        let l = self.grid.half_width;
        let lo = (min_cells * h).min(0.5 * l);
        (0..self.grid.dim).map(|_| self.rng.random_range(lo..=0.8 * l)).collect()
    }
}

fn gaussian_at(x: &[f64], c: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .zip(w)
        .map(|((x, c), w)| {
            let r = (x - c) / w;
            -r * r
        })
        .sum::<f64>()
        .exp()
}

fn bump_at(x: &[f64], c: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .zip(w)
        .map(|((x, c), w)| {
            let r = (x - c) / w;
            let s = (1.0 - r * r).max(0.0);
            s * s
        })
        .product()
}

/// Probe `index` of the family with the given seed.
pub fn probe(grid: &Grid, seed: u64, index: u64) -> (ComplexField, ProbeDescriptor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut s = Sampler { rng, grid };
    let kind = match index % 4 {
        0 => ProbeKind::Gaussian,
        1 => ProbeKind::Bump,
        2 => ProbeKind::Eigenmodes,
        _ => ProbeKind::RandomSmooth,
    };
    let scale = 10f64.powf(s.rng.random_range(-3.0..3.0));
    let amp = s.phase() * scale;
    let dim = grid.dim;
    let field = match kind {
        ProbeKind::Gaussian => {
            let (c, w) = (s.center(), s.widths(2.0));
            ComplexField::from_fn(*grid, move |x| amp * gaussian_at(x, &c, &w))
        }
        ProbeKind::Bump => {
            let (c, w) = (s.center(), s.widths(3.0));
            ComplexField::from_fn(*grid, move |x| amp * bump_at(x, &c, &w))
        }
        ProbeKind::Eigenmodes => {
            let count = s.rng.random_range(1..=4);
            let modes: Vec<(Vec<f64>, Complex64)> = (0..count)
                .map(|_| {
                    let k = (0..dim).map(|_| s.rng.random_range(1..=6) as f64).collect();
                    let c = s.phase() * s.rng.random_range(0.1..1.0);
                    (k, c)
                })
                .collect();
            let l = grid.half_width;
            ComplexField::from_fn(*grid, move |x| {
                let mut total = Complex64::new(0.0, 0.0);
                for (k, c) in &modes {
                    let v: f64 = x.iter().zip(k).map(|(x, k)| (k * PI * (x + l) / (2.0 * l)).sin()).product();
                    total += c * v;
                }
                amp * total
            })
        }
        ProbeKind::RandomSmooth => {
            let count = s.rng.random_range(2..=5);
            let blobs: Vec<(Vec<f64>, Vec<f64>, Complex64)> = (0..count)
                .map(|_| {
                    let c = s.center();
                    let w = s.widths(2.0).into_iter().map(|w| 0.5 * w).collect::<Vec<_>>();
                    let a = s.phase() * s.rng.random_range(0.2..1.0);
                    (c, w, a)
                })
                .collect();
            ComplexField::from_fn(*grid, move |x| {
                let mut total = Complex64::new(0.0, 0.0);
                for (c, w, a) in &blobs {
                    total += a * gaussian_at(x, c, w);
                }
                amp * total
            })
        }
    };
    (
        field,
        ProbeDescriptor {
            seed,
            index,
            kind,
            scale,
        },
    )
}

/// Maximum of [`gn_ratio`] over the first `family_size` probes.
/// Ties go to the lowest index.
pub fn estimate_cgn(m: f64, grid: &Grid, family_size: usize, seed: u64) -> Result<GnEstimate, GnError> {
    if !(0.0..=1.0).contains(&m) {
        return Err(GnError::M(m));
    }
    if family_size == 0 {
        return Err(GnError::EmptyFamily);
    }
    let ratios = exec::map_indices(family_size, |i| {
        let (u, d) = probe(grid, seed, i as u64);
        (gn_ratio(&u, m).unwrap_or(0.0), d)
    });
    let mut best = 0;
    for (i, (r, _)) in ratios.iter().enumerate() {
        if *r > ratios[best].0 {
            best = i;
        }
    }
    Ok(GnEstimate {
        m,
        dim: grid.dim,
        grid: *grid,
        c_gn: ratios[best].0,
        family_size,
        seed,
        worst: ratios[best].1,
    })
}

impl GnEstimate {
    /// Regenerates the probe attaining the maximum.
    pub fn worst_field(&self) -> ComplexField {
        probe(&self.grid, self.seed, self.worst.index).0
    }
}

/// Outcome of [`check_gn`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GnCheck {
    /// `gn_ratio(u) / c_gn`; at most 1 exactly when the GN form holds.
    pub ratio: f64,
    /// `‖u‖₂^{2δ}`.
    pub lhs: f64,
    /// `c_gn^{4/(N(1−m)+4)} (‖∇u‖² + ‖u‖_{m+1}^{m+1})`.
    pub rhs: f64,
    /// `lhs ≤ rhs`.
    pub holds: bool,
}

/// Evaluates `‖u‖^{2δ} ≤ C^{4/(N(1−m)+4)}(‖∇u‖² + ‖u‖_{m+1}^{m+1})` with the
/// supplied constant, together with the normalized GN ratio.
pub fn check_gn(u: &ComplexField, m: f64, c_gn: f64) -> Result<GnCheck, GnError> {
    if !(c_gn.is_finite() && c_gn > 0.0) {
        return Err(GnError::BadConstant(c_gn));
    }
    let r = gn_ratio(u, m)?;
    let dim = u.grid().dim;
    let lhs = u.mass_l2().powf(2.0 * gn_delta(m, dim));
    let rhs = c_gn.powf(gn_power(m, dim)) * (u.grad_norm_sq() + u.lq_power(m + 1.0));
    Ok(GnCheck {
        ratio: r / c_gn,
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}
