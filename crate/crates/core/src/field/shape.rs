//! Spatial profiles used for initial data and forcing shapes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexField, FieldError, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    /// `A Π exp(−((x_i − c_i)/w_i)²)`.
    Gaussian,
    /// `A Π (1 − ((x_i − c_i)/w_i)²)₊²`, compactly supported and C¹.
    Bump,
}

/// Separable profile described per axis. Length-one `center`/`width`
/// vectors are broadcast to every axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub amplitude: Complex64,
}

impl ShapeSpec {
    pub fn gaussian(center: f64, width: f64, amplitude: Complex64) -> Self {
        Self {
            kind: ShapeKind::Gaussian,
            center: vec![center],
            width: vec![width],
            amplitude,
        }
    }

    pub fn bump(center: f64, width: f64, amplitude: Complex64) -> Self {
        Self {
            kind: ShapeKind::Bump,
            center: vec![center],
            width: vec![width],
            amplitude,
        }
    }

    fn axis_value(v: &[f64], axis: usize) -> f64 {
        if v.len() == 1 {
            v[0]
        } else {
            v[axis]
        }
    }

    pub fn sample(&self, grid: Grid) -> Result<ComplexField, FieldError> {
        grid.check()?;
        for (name, v) in [("center", &self.center), ("width", &self.width)] {
            if v.len() != 1 && v.len() != grid.dim {
                return Err(FieldError::Shape(format!(
                    "{name} needs 1 or {} entries, got {}",
                    grid.dim,
                    v.len()
                )));
            }
        }
        if self.width.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(FieldError::Shape("widths must be positive".into()));
        }
        if !self.center.iter().all(|c| c.is_finite())
            || !(self.amplitude.re.is_finite() && self.amplitude.im.is_finite())
        {
            return Err(FieldError::Shape("center and amplitude must be finite".into()));
        }
        let spec = self.clone();
        Ok(ComplexField::from_fn(grid, move |x| {
            let mut prod = 1.0;
            for (axis, xi) in x.iter().enumerate() {
                let r = (xi - Self::axis_value(&spec.center, axis)) / Self::axis_value(&spec.width, axis);
                prod *= match spec.kind {
                    ShapeKind::Gaussian => (-r * r).exp(),
                    ShapeKind::Bump => {
                        let s = 1.0 - r * r;
                        if s > 0.0 {
                            s * s
                        } else {
                            0.0
                        }
                    }
                };
            }
            spec.amplitude * prod
        }))
    }
}
