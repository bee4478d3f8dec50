//! Numerical laboratory for the damped complex Ginzburg–Landau equation
//!
//! ```text
//! e^{-iθ} ∂u/∂t − Δu + a|u|^{-(1-m)}u + b|u|^{p-1}u + γu = f,   u = 0 on the boundary,
//! ```
//!
//! with singular (`0 < m < 1`) or saturated (`m = 0`) damping. The crate
//! provides the admissibility checks and derived constants of the extinction
//! theory ([`params`]), a finite-difference grid with exact summation-by-parts
//! norms ([`field`]), a Strang splitting integrator that keeps exact zeros
//! ([`dynamics`]), forcing constructors ([`forcing`]), the scalar comparison
//! ODE `z' + αz^δ = g` ([`comparison_ode`]), a Gagliardo–Nirenberg constant
//! estimator ([`gn`]) and the post-hoc checks that tie them together
//! ([`diagnostics`]).
//!
//! Grid-point loops run on rayon when the `parallel` feature is enabled
//! (the default). Reductions use a fixed chunking so results are
//! bit-identical with and without the feature.

// `!(a < b)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison_ode;
pub mod diagnostics;
pub mod dynamics;
pub mod exec;
pub mod field;
pub mod forcing;
pub mod gn;
pub mod params;
mod rk;

pub use num_complex::Complex64;

pub use comparison_ode::{ScalarTrajectory, Source};
pub use diagnostics::{DependenceCheck, DecayCheck, EnergyLedgerRow, ExtinctionReport};
pub use dynamics::{Integrator, RunRecord, SchemeConfig, SplittingOrder};
pub use field::{ComplexField, Grid, ShapeKind, ShapeSpec};
pub use forcing::{ForcingKind, ForcingProfile, TimeEnvelope};
pub use gn::GnEstimate;
pub use params::{DerivedConstants, PhysicalParams};
