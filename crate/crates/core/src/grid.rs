//! Periodic grids and the gridded scalar / vector fields that live on them.

use crate::error::{Error, Result};
use crate::vec3::V3;
use std::f64::consts::PI;

/// A uniform periodic grid on `[0, L_0) x [0, L_1) (x [0, L_2))`.
///
/// Values are stored row-major with axis 0 (x) slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    lengths: Vec<f64>,
}

impl Grid {
    pub fn new(shape: &[usize], lengths: &[f64]) -> Result<Self> {
        if shape.len() != 2 && shape.len() != 3 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3, got {}",
                shape.len()
            )));
        }
        if lengths.len() != shape.len() {
            return Err(Error::InvalidGrid(format!(
                "{} axis lengths given for a {}D grid",
                lengths.len(),
                shape.len()
            )));
        }
        for (axis, &n) in shape.iter().enumerate() {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: point count {n} must be a power of two >= 8"
                )));
            }
        }
        for (axis, &l) in lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: domain length {l} must be finite and positive"
                )));
            }
        }
        shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidGrid("grid too large".into()))?;
        Ok(Self {
            shape: shape.to_vec(),
            lengths: lengths.to_vec(),
        })
    }

    /// `n x n` grid on `[0, 2π)²`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(&[n, n], &[2.0 * PI, 2.0 * PI])
    }

    /// `n x n x n` grid on `[0, 2π)³`.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(&[n, n, n], &[2.0 * PI; 3])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.shape[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    /// Cell volume (area in 2D).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for a in (0..self.dim() - 1).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.shape[a];
            idx /= self.shape[a];
        }
        out
    }

    pub fn ravel(&self, multi: [usize; 3]) -> usize {
        let mut idx = 0;
        for (a, &m) in multi.iter().enumerate().take(self.dim()) {
            idx = idx * self.shape[a] + m;
        }
        idx
    }

    /// Physical coordinates of a grid node (z = 0 in 2D).
    pub fn point(&self, idx: usize) -> V3 {
        let m = self.unravel(idx);
        let mut p = [0.0; 3];
        for (a, slot) in p.iter_mut().enumerate().take(self.dim()) {
            *slot = m[a] as f64 * self.spacing(a);
        }
        p
    }

    /// Domain center.
    pub fn center(&self) -> V3 {
        let mut c = [0.0; 3];
        for (a, slot) in c.iter_mut().enumerate().take(self.dim()) {
            *slot = 0.5 * self.lengths[a];
        }
        c
    }

    /// Evaluates `f` at every grid node.
    pub fn sample(&self, f: impl Fn(V3) -> f64) -> ScalarField {
        let values = (0..self.len()).map(|i| f(self.point(i))).collect();
        ScalarField {
            grid: self.clone(),
            values,
        }
    }

    /// Evaluates a vector-valued `f` at every grid node, keeping `dim` components.
    pub fn sample_vector(&self, f: impl Fn(V3) -> V3) -> VectorField {
        let mut components = vec![vec![0.0; self.len()]; self.dim()];
        for i in 0..self.len() {
            let v = f(self.point(i));
            for (c, comp) in components.iter_mut().enumerate() {
                comp[i] = v[c];
            }
        }
        VectorField {
            grid: self.clone(),
            components,
        }
    }

    /// Minimum-image displacement `b - a` on the periodic domain.
    pub fn periodic_delta(&self, a: V3, b: V3) -> V3 {
        let mut d = [0.0; 3];
        for (ax, slot) in d.iter_mut().enumerate().take(self.dim()) {
            let l = self.lengths[ax];
            let mut x = b[ax] - a[ax];
            x -= l * (x / l).round();
            *slot = x;
        }
        d
    }
}

/// A real scalar field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub(crate) grid: Grid,
    pub(crate) values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("scalar field value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Flat index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Domain integral by the (spectrally accurate) rectangle rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Domain integral of the square.
    pub fn integral_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A real vector field with one component array per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub(crate) grid: Grid,
    pub(crate) components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::Shape(format!(
                "{} components for a {}D grid",
                components.len(),
                grid.dim()
            )));
        }
        for (c, comp) in components.iter().enumerate() {
            if comp.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "component {c} has {} values, grid has {}",
                    comp.len(),
                    grid.len()
                )));
            }
            if comp.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("vector field component {c}")));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            components: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    pub fn from_scalars(parts: Vec<ScalarField>) -> Result<Self> {
        let grid = parts
            .first()
            .map(|p| p.grid.clone())
            .ok_or_else(|| Error::Shape("no components".into()))?;
        if parts.iter().any(|p| p.grid != grid) {
            return Err(Error::Shape("components live on different grids".into()));
        }
        Self::new(grid, parts.into_iter().map(|p| p.values).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.components
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.components[c].clone(),
        }
    }

    pub fn into_scalars(self) -> Vec<ScalarField> {
        let grid = self.grid;
        self.components
            .into_iter()
            .map(|values| ScalarField {
                grid: grid.clone(),
                values,
            })
            .collect()
    }

    pub fn at(&self, idx: usize) -> V3 {
        let mut v = [0.0; 3];
        for (c, comp) in self.components.iter().enumerate() {
            v[c] = comp[idx];
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn magnitude(&self) -> ScalarField {
        let n = self.grid.len();
        let values = (0..n)
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c[i] * c[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().max()
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Domain integral of `self · other`.
    pub fn integral_dot(&self, other: &VectorField) -> f64 {
        let s: f64 = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|v| v * s).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(&[4, 8], &[1.0, 1.0]).is_err());
        assert!(Grid::new(&[12, 8], &[1.0, 1.0]).is_err());
        assert!(Grid::new(&[8], &[1.0]).is_err());
        assert!(Grid::new(&[8, 8], &[1.0, -1.0]).is_err());
        assert!(Grid::new(&[8, 8], &[1.0]).is_err());
        assert!(Grid::new(&[8, 16, 32], &[1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::new(&[8, 16, 32], &[1.0; 3]).unwrap();
        for idx in [0, 1, 31, 32, 511, 4095] {
            assert_eq!(g.ravel(g.unravel(idx)), idx);
        }
        let p = g.point(g.ravel([1, 2, 3]));
        assert!((p[0] - 1.0 / 8.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 16.0).abs() < 1e-15);
        assert!((p[2] - 3.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_field_rejects_nan() {
        let g = Grid::square(8).unwrap();
        let mut v = vec![0.0; 64];
        v[5] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn periodic_delta_wraps() {
        let g = Grid::square(8).unwrap();
        let d = g.periodic_delta([0.1, 0.0, 0.0], [2.0 * PI - 0.1, 0.0, 0.0]);
        assert!((d[0] + 0.2).abs() < 1e-12);
    }
}
