//! Complex fields on a uniform grid over the box `(−L, L)^dim` with
//! homogeneous Dirichlet walls.
//!
//! Only interior points are stored; boundary values are implicitly zero.
//! Points are laid out row-major with the last axis fastest.
//!
//! The gradient seminorm uses forward differences over every cell edge,
//! including the two edges touching each wall. With that choice
//! `−⟨Δ_h u, u⟩ = ‖∇_h u‖²` holds exactly, which is what makes the discrete
//! energy balance meaningful at round-off level.

mod helmholtz;
mod io;
mod shape;

pub use helmholtz::{solve_helmholtz, HelmholtzSolver, SolveError, DEFAULT_SOLVER_TOLERANCE};
pub use io::{read_binary, write_binary, write_csv};
pub use shape::{ShapeKind, ShapeSpec};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("grid half-width must be positive and finite, got {0}")]
    HalfWidth(f64),
    #[error("grid needs at least 3 interior points per axis, got {0}")]
    TooFewPoints(usize),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("field value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("grids differ")]
    GridMismatch,
    #[error("shape descriptor: {0}")]
    Shape(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform grid of `points_per_axis^dim` interior points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self, FieldError> {
        let g = Self {
            dim,
            half_width,
            points_per_axis,
        };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<(), FieldError> {
        if !(1..=3).contains(&self.dim) {
            return Err(FieldError::Dimension(self.dim));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(FieldError::HalfWidth(self.half_width));
        }
        if self.points_per_axis < 3 {
            return Err(FieldError::TooFewPoints(self.points_per_axis));
        }
        Ok(())
    }

    /// Mesh width `h = 2L / (n+1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points_per_axis as f64 + 1.0)
    }

    /// Cell volume `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Number of interior points.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    /// Coordinate of interior node `j` along any axis.
    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + (j as f64 + 1.0) * self.spacing()
    }

    /// Per-axis node indices of a linear index.
    pub fn multi_index(&self, index: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut out = [0; 3];
        let mut rest = index;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % n;
            rest /= n;
        }
        out
    }

    /// Coordinates of a linear index; unused axes are zero.
    pub fn coordinates(&self, index: usize) -> [f64; 3] {
        let mi = self.multi_index(index);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.node(mi[axis]);
        }
        x
    }
}

/// A complex field on the interior points of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid,
        }
    }

    /// Wraps values, checking the length and that every entry is finite.
    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self, FieldError> {
        grid.check()?;
        if values.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(FieldError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the interior nodes. Only the first `dim` coordinates
    /// passed to `f` are meaningful.
    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync + Send,
    {
        let dim = grid.dim;
        let values = exec::map_indices(grid.len(), |i| {
            let x = grid.coordinates(i);
            f(&x[..dim])
        });
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `(h^dim Σ|u_i|²)^{1/2}`.
    pub fn mass_l2(&self) -> f64 {
        (self.grid.cell_volume() * exec::sum_by(&self.values, |_, z| z.norm_sqr())).sqrt()
    }

    /// `h^dim Σ|u_i|^q`, i.e. `‖u‖_q^q`.
    pub fn lq_power(&self, q: f64) -> f64 {
        let s = if q == 2.0 {
            exec::sum_by(&self.values, |_, z| z.norm_sqr())
        } else if q == 1.0 {
            exec::sum_by(&self.values, |_, z| z.norm())
        } else {
            exec::sum_by(&self.values, |_, z| z.norm().powf(q))
        };
        self.grid.cell_volume() * s
    }

    /// `(h^dim Σ|u_i|^q)^{1/q}` for `q ≥ 1`.
    pub fn norm_lq(&self, q: f64) -> f64 {
        assert!(q >= 1.0, "norm_lq needs q >= 1, got {q}");
        if q == 2.0 {
            return self.mass_l2();
        }
        self.lq_power(q).powf(1.0 / q)
    }

    /// Largest pointwise modulus.
    pub fn sup_norm(&self) -> f64 {
        exec::max_by(&self.values, |z| z.norm())
    }

    /// `h^dim Σ_axes Σ_edges |(u_{i+1} − u_i)/h|²`, zero padding at the walls.
    pub fn grad_norm_sq(&self) -> f64 {
        let g = &self.grid;
        let n = g.points_per_axis;
        let h = g.spacing();
        let u = &self.values;
        let mut total = 0.0;
        for axis in 0..g.dim {
            let s = g.stride(axis);
            // Each point contributes its backward edge; points on the upper
            // wall also contribute the closing edge.
            total += exec::sum_by(u, |i, z| {
                let j = (i / s) % n;
                let below = if j > 0 { u[i - s] } else { Complex64::new(0.0, 0.0) };
                let mut e = (z - below).norm_sqr();
                if j == n - 1 {
                    e += z.norm_sqr();
                }
                e
            });
        }
        g.cell_volume() * total / (h * h)
    }

    /// Standard `(2·dim+1)`-point Laplacian with Dirichlet closure.
    pub fn apply_laplacian(&self) -> ComplexField {
        let mut out = ComplexField::zeros(self.grid);
        laplacian_into(&self.grid, &self.values, &mut out.values);
        out
    }

    /// `h^dim Σ u_i conj(v_i)`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        assert_eq!(self.grid, other.grid, "inner product across grids");
        let v = &other.values;
        exec::sum_complex_by(&self.values, |i, z| z * v[i].conj()) * self.grid.cell_volume()
    }

    pub fn scaled(&self, c: Complex64) -> ComplexField {
        let mut out = self.clone();
        exec::for_each_mut(&mut out.values, |_, z| *z *= c);
        out
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: Complex64, other: &ComplexField) -> ComplexField {
        assert_eq!(self.grid, other.grid, "add_scaled across grids");
        let v = &other.values;
        let mut out = self.clone();
        exec::for_each_mut(&mut out.values, |i, z| *z += c * v[i]);
        out
    }

    pub fn sub(&self, other: &ComplexField) -> ComplexField {
        self.add_scaled(Complex64::new(-1.0, 0.0), other)
    }
}

pub(crate) fn laplacian_into(g: &Grid, u: &[Complex64], out: &mut [Complex64]) {
    let n = g.points_per_axis;
    let h2 = g.spacing() * g.spacing();
    let dim = g.dim;
    exec::for_each_mut(out, |i, o| {
        let c = u[i];
        let mut acc = Complex64::new(0.0, 0.0);
        for axis in 0..dim {
            let s = g.stride(axis);
            let j = (i / s) % n;
            let mut lap = -2.0 * c;
            if j > 0 {
                lap += u[i - s];
            }
            if j + 1 < n {
                lap += u[i + s];
            }
            acc += lap;
        }
        *o = acc / h2;
    });
}
