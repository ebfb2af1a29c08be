//! Periodic grids and the fields sampled on them.
//!
//! The box is `[-L/2, L/2)^dim` with `n` nodes per axis. In 2D the storage is
//! row-major with the x index slow: `values[ix * n + iy]`.

mod covariant;
mod norms;
pub mod snapshot;
mod spectral;

pub use covariant::{
    covariant_gradient, covariant_gradient_nodal, covariant_gradient_spectral, h1mg_norm, h1mg_norm_nodal,
    kinetic_energy, kinetic_link_derivative, LinkField, MagneticLaplacian,
};
pub use norms::{boundary_leakage, inner_product, l2_norm, lp_norm, max_abs};
pub use spectral::Spectral;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    spacing: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::invalid(format!("points per axis must be a power of two >= 8, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!("box length must be positive, got {length}")));
        }
        // n is a power of two, so the division is exact.
        Ok(Grid { dim, n, length, spacing: length / n as f64 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `spacing^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of node `i` along one axis.
    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing
    }

    /// Per-axis indices of a flat index (unused axes are 0).
    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    #[inline]
    pub fn flatten(&self, ix: [usize; 2]) -> usize {
        if self.dim == 1 {
            ix[0]
        } else {
            ix[0] * self.n + ix[1]
        }
    }

    /// Physical coordinates of a node; `y = 0` in 1D.
    #[inline]
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        if self.dim == 1 {
            [self.axis_coord(i), 0.0]
        } else {
            [self.axis_coord(i), self.axis_coord(j)]
        }
    }

    /// Flat index of the periodic neighbour of `idx` along `axis`, shifted by +1 or -1.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let mut ix = self.unflatten(idx);
        ix[axis] = if forward { (ix[axis] + 1) % self.n } else { (ix[axis] + self.n - 1) % self.n };
        self.flatten(ix)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch(format!(
                "grid {}D n={} L={} vs {}D n={} L={}",
                self.dim, self.n, self.length, other.dim, other.n, other.length
            )));
        }
        Ok(())
    }
}

/// Complex field sampled on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ComplexField { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        ComplexField { grid, values }
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        ComplexField { grid: self.grid, values: self.values.iter().map(|z| z * c).collect() }
    }

    /// `self - other`, pointwise.
    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ComplexField { grid: self.grid, values })
    }

    /// Pointwise multiplication by `exp(i * phase(x))`.
    pub fn with_phase(&self, phase: &[f64]) -> Result<Self> {
        if phase.len() != self.values.len() {
            return Err(Error::DimensionMismatch("phase length differs from field length".into()));
        }
        let values = self.values.iter().zip(phase).map(|(z, &p)| z * Complex64::from_polar(1.0, p)).collect();
        Ok(ComplexField { grid: self.grid, values })
    }
}

/// Real scalar field, e.g. a phase or a density.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        RealField { grid, values: (0..grid.len()).map(|i| f(grid.coords(i))).collect() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Real vector field with one component per spatial axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl RealVectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} components for a {}D grid",
                components.len(),
                grid.dim()
            )));
        }
        if components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::DimensionMismatch("component length differs from grid size".into()));
        }
        Ok(RealVectorField { grid, components })
    }

    pub fn zeros(grid: Grid) -> Self {
        RealVectorField { grid, components: vec![vec![0.0; grid.len()]; grid.dim()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut components = vec![Vec::with_capacity(grid.len()); grid.dim()];
        for i in 0..grid.len() {
            let a = f(grid.coords(i));
            for (j, c) in components.iter_mut().enumerate() {
                c.push(a[j]);
            }
        }
        RealVectorField { grid, components }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// Largest Euclidean length over the nodes.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
