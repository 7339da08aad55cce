//! Uniform box grids, nodal fields, trapezoidal quadrature and finite-difference gradients.
//!
//! Nodes are stored in row-major order (last axis fastest). Every node on the outer
//! face of the box is a boundary node; the Dirichlet class is the set of fields that
//! vanish there.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: Vec<usize>,
    h: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    boundary_mask: Vec<bool>,
    #[serde(skip)]
    weights: Vec<f64>,
    #[serde(skip)]
    interior: Vec<usize>,
}

/// Builds a grid on the box `extent[0] x ... x extent[dim-1]` with `n[k]` nodes per axis.
pub fn build_grid(dim: usize, extent: &[(f64, f64)], n: &[usize]) -> Result<Arc<Grid>> {
    Grid::new(dim, extent, n).map(Arc::new)
}

impl Grid {
    pub fn new(dim: usize, extent: &[(f64, f64)], n: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if extent.len() != dim || n.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} extents and node counts, got {} and {}",
                extent.len(),
                n.len()
            )));
        }
        for k in 0..dim {
            if n[k] < 3 {
                return Err(Error::InvalidGrid(format!(
                    "axis {k} has {} nodes; at least 3 are needed for an interior",
                    n[k]
                )));
            }
            let (lo, hi) = extent[k];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidGrid(format!("axis {k} has empty extent [{lo}, {hi}]")));
            }
        }

        let lo: Vec<f64> = extent.iter().map(|e| e.0).collect();
        let hi: Vec<f64> = extent.iter().map(|e| e.1).collect();
        let h: Vec<f64> = (0..dim).map(|k| (hi[k] - lo[k]) / (n[k] - 1) as f64).collect();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * n[k + 1];
        }
        let total: usize = n.iter().product();

        let mut boundary_mask = vec![false; total];
        let mut weights = vec![1.0; total];
        let mut interior = Vec::new();
        let mut idx = vec![0usize; dim];
        for node in 0..total {
            let mut rem = node;
            for k in 0..dim {
                idx[k] = rem / strides[k];
                rem %= strides[k];
            }
            let mut on_face = false;
            let mut w = 1.0;
            for k in 0..dim {
                let end = idx[k] == 0 || idx[k] == n[k] - 1;
                on_face |= end;
                w *= if end { 0.5 * h[k] } else { h[k] };
            }
            boundary_mask[node] = on_face;
            weights[node] = w;
            if !on_face {
                interior.push(node);
            }
        }

        Ok(Self {
            dim,
            lo,
            hi,
            n: n.to_vec(),
            h,
            strides,
            boundary_mask,
            weights,
            interior,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn node_count(&self) -> usize {
        self.boundary_mask.len()
    }

    /// Total measure of the box.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_mask[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    /// Tensor-product trapezoidal weights, one per node.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices of the interior (non-boundary) nodes, in increasing order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rem = node;
        self.strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn node_at(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.coords_into(node, &mut x);
        x
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        let mut rem = node;
        for k in 0..self.dim {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.lo[k] + i as f64 * self.h[k];
        }
    }

    /// Node closest to `x` in the Euclidean sense (per-axis rounding, clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim)
            .map(|k| {
                let t = ((x[k] - self.lo[k]) / self.h[k]).round();
                t.clamp(0.0, (self.n[k] - 1) as f64) as usize
            })
            .collect();
        self.node_at(&idx)
    }

    /// Structural identity: same box and same node counts.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim && self.n == other.n && self.lo == other.lo && self.hi == other.hi)
    }

    /// Applies the transpose of [`discrete_gradient`] to a node-major vector field.
    pub(crate) fn gradient_adjoint(&self, flux: &[f64]) -> Vec<f64> {
        let dim = self.dim;
        let mut out = vec![0.0; self.node_count()];
        for node in 0..self.node_count() {
            let idx = self.multi_index(node);
            for k in 0..dim {
                let f = flux[node * dim + k];
                if f == 0.0 {
                    continue;
                }
                let s = self.strides[k];
                let h = self.h[k];
                let i = idx[k];
                if i == 0 {
                    out[node + s] += f / h;
                    out[node] -= f / h;
                } else if i == self.n[k] - 1 {
                    out[node] += f / h;
                    out[node - s] -= f / h;
                } else {
                    out[node + s] += f / (2.0 * h);
                    out[node - s] -= f / (2.0 * h);
                }
            }
        }
        out
    }
}

/// One real value per grid node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch {
                expected: grid.node_count(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.node_count())
            .map(|i| {
                grid.coords_into(i, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scaled(&self, t: f64) -> Self {
        self.map(|v| t * v)
    }

    /// `self + t * other`
    pub fn add_scaled(&self, t: f64, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + t * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Errors unless every boundary value is exactly zero.
    pub fn check_dirichlet(&self) -> Result<()> {
        for (node, (&v, &b)) in self.values.iter().zip(self.grid.boundary_mask()).enumerate() {
            if b && v != 0.0 {
                return Err(Error::BoundaryViolation { node, value: v });
            }
        }
        Ok(())
    }

    /// Zeroes all boundary values.
    pub fn mask_boundary(mut self) -> Self {
        for (v, &b) in self.values.iter_mut().zip(self.grid.boundary_mask()) {
            if b {
                *v = 0.0;
            }
        }
        self
    }

    pub fn integrate(&self) -> f64 {
        integrate(self)
    }
}

/// `dim` components per node, stored node-major.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, components: Vec<f64>) -> Result<Self> {
        let expected = grid.node_count() * grid.dim();
        if components.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: components.len(),
            });
        }
        Ok(Self { grid, components })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.components[node * d..(node + 1) * d]
    }

    /// Pointwise Euclidean length.
    pub fn magnitude(&self) -> ScalarField {
        let d = self.grid.dim();
        let values = self
            .components
            .chunks_exact(d)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Composite trapezoidal rule over the box.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values
        .iter()
        .zip(f.grid.quadrature_weights())
        .map(|(v, w)| v * w)
        .sum()
}

/// Central differences at nodes interior to an axis, one-sided differences at its ends.
pub fn discrete_gradient(u: &ScalarField) -> VectorField {
    let grid = &u.grid;
    let dim = grid.dim();
    let mut comps = vec![0.0; grid.node_count() * dim];
    for (node, out) in comps.chunks_exact_mut(dim).enumerate() {
        grid.gradient_at(&u.values, node, out);
    }
    VectorField {
        grid: grid.clone(),
        components: comps,
    }
}

impl Grid {
    /// Discrete gradient of nodal `values` at one node, written into `out`.
    pub(crate) fn gradient_at(&self, values: &[f64], node: usize, out: &mut [f64]) {
        let mut rest = node;
        for k in (0..self.dim).rev() {
            let i = rest % self.n[k];
            rest /= self.n[k];
            let s = self.strides[k];
            let h = self.h[k];
            out[k] = if i == 0 {
                (values[node + s] - values[node]) / h
            } else if i == self.n[k] - 1 {
                (values[node] - values[node - s]) / h
            } else {
                (values[node + s] - values[node - s]) / (2.0 * h)
            };
        }
    }

    /// Nodes whose discrete gradient or nodal value depends on the value at `node`.
    pub fn stencil(&self, node: usize) -> Vec<usize> {
        let idx = self.multi_index(node);
        let mut out = vec![node];
        for k in 0..self.dim {
            let s = self.strides[k];
            if idx[k] > 0 {
                out.push(node - s);
            }
            if idx[k] + 1 < self.n[k] {
                out.push(node + s);
            }
        }
        out
    }
}
