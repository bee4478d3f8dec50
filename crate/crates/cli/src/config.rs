//! Run configuration files.
//!
//! A config is a TOML document with the sections `[params]`, `[grid]`,
//! `[scheme]`, `[forcing]`, `[initial]`, `[diagnostics]` and `[output]`.
//! Complex coefficients are written either as a number or as `[re, im]`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use glx_core::dynamics::SchemeConfig;
use glx_core::{Complex64, Grid, PhysicalParams, ShapeKind, ShapeSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(&self) -> Complex64 {
        match *self {
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue::Pair([z.re, z.im])
    }
}

fn one() -> ComplexValue {
    ComplexValue::Real(1.0)
}

fn zero() -> ComplexValue {
    ComplexValue::Real(0.0)
}

fn three() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default)]
    pub theta: f64,
    pub m: f64,
    #[serde(default = "three")]
    pub p: f64,
    #[serde(default = "one")]
    pub a: ComplexValue,
    #[serde(default = "zero")]
    pub b: ComplexValue,
    #[serde(default = "zero")]
    pub gamma: ComplexValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKindName {
    #[default]
    Zero,
    Free,
    Cutoff,
    Bounded,
    Scheduled,
    BangBang,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeName {
    #[default]
    Constant,
    Exponential,
    Cosine,
}

fn default_center() -> Vec<f64> {
    vec![0.0]
}

fn default_width() -> Vec<f64> {
    vec![1.0]
}

fn gaussian() -> ShapeKind {
    ShapeKind::Gaussian
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    #[serde(default)]
    pub kind: ForcingKindName,
    pub t0: Option<f64>,
    /// Scheduled amplitude; defaults to the admissible maximum.
    pub eps: Option<f64>,
    pub mu: Option<f64>,
    #[serde(default)]
    pub envelope: EnvelopeName,
    pub rate: Option<f64>,
    pub omega: Option<f64>,
    #[serde(default = "gaussian")]
    pub shape: ShapeKind,
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    #[serde(default = "default_width")]
    pub width: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: ComplexValue,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            kind: ForcingKindName::Zero,
            t0: None,
            eps: None,
            mu: None,
            envelope: EnvelopeName::Constant,
            rate: None,
            omega: None,
            shape: ShapeKind::Gaussian,
            center: default_center(),
            width: default_width(),
            amplitude: one(),
        }
    }
}

impl ForcingSection {
    pub fn shape_spec(&self) -> ShapeSpec {
        ShapeSpec {
            kind: self.shape,
            center: self.center.clone(),
            width: self.width.clone(),
            amplitude: self.amplitude.value(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Gaussian,
    Bump,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    #[serde(default = "default_width")]
    pub width: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: ComplexValue,
    /// Binary field file for `kind = "file"`, relative to the config file.
    pub path: Option<PathBuf>,
    /// Rescale the initial field to this L² norm.
    pub mass: Option<f64>,
    /// Rescale to the largest norm admitted by a scheduled forcing.
    #[serde(default)]
    pub scale_to_max_mass: bool,
}

fn yes() -> bool {
    true
}

fn default_family() -> usize {
    256
}

fn default_safety() -> f64 {
    1.1
}

fn default_decay_tolerance() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "yes")]
    pub ledger: bool,
    #[serde(default = "yes")]
    pub report: bool,
    #[serde(default = "yes")]
    pub exp_decay: bool,
    /// Use this constant instead of estimating it on the run grid.
    pub c_gn: Option<f64>,
    #[serde(default = "default_family")]
    pub gn_family_size: usize,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default = "default_decay_tolerance")]
    pub decay_tolerance: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            ledger: true,
            report: true,
            exp_decay: true,
            c_gn: None,
            gn_family_size: default_family(),
            safety_factor: default_safety(),
            decay_tolerance: default_decay_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub forcing: ForcingSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("malformed config {}", path.display()))
    }

    pub fn physical_params(&self) -> PhysicalParams {
        let p = &self.params;
        PhysicalParams {
            theta: p.theta,
            m: p.m,
            p: p.p,
            a: p.a.value(),
            b: p.b.value(),
            gamma: p.gamma.value(),
            dim: self.grid.dim,
        }
    }

    pub fn grid(&self) -> anyhow::Result<Grid> {
        Ok(Grid::new(self.grid.dim, self.grid.half_width, self.grid.points)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[params]
m = 0.0

[grid]
dim = 1
half_width = 10.0
points = 255

[scheme]
dt = 1e-3
t_end = 2.0

[initial]
kind = "gaussian"
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let p = cfg.physical_params();
        assert_eq!(p, PhysicalParams::heat(0.0, 1));
        assert_eq!(cfg.forcing.kind, ForcingKindName::Zero);
        assert_eq!(cfg.scheme.snapshot_stride, 1);
        assert_eq!(cfg.diagnostics.safety_factor, 1.1);
        assert_eq!(cfg.output.seed, 0);
    }

    #[test]
    fn complex_values_parse_both_ways() {
        let text = MINIMAL.replace("m = 0.0", "m = 0.5\na = [0.8, 0.5]\nb = 2.0");
        let p = RunConfig::parse(&text).unwrap().physical_params();
        assert_eq!(p.a, Complex64::new(0.8, 0.5));
        assert_eq!(p.b, Complex64::new(2.0, 0.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("m = 0.0", "m = 0.0\nbogus = 1");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn forcing_section() {
        let text = format!(
            "{MINIMAL}\n[forcing]\nkind = \"cutoff\"\nt0 = 1.5\nenvelope = \"cosine\"\nomega = 2.0\nshape = \"bump\"\nwidth = [2.0]\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.forcing.kind, ForcingKindName::Cutoff);
        assert_eq!(cfg.forcing.t0, Some(1.5));
        assert_eq!(cfg.forcing.shape_spec().kind, ShapeKind::Bump);
    }
}
