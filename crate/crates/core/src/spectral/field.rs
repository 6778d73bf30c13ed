use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Sampled scalar (1 component) or vector (`dim` components) field.
///
/// Samples are stored component-major; within a component the layout is
/// row-major with axis 0 varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    components: usize,
    data: Vec<f64>,
}

fn check_components(components: usize) -> Result<()> {
    if components >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidInput("a field needs at least one component".into()))
    }
}

impl RealField {
    /// Builds a field, rejecting wrong lengths and non-finite samples.
    pub fn new(grid: Grid, components: usize, data: Vec<f64>) -> Result<Self> {
        check_components(components)?;
        if data.len() != components * grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                components * grid.len(),
                data.len()
            )));
        }
        let field = RealField { grid, components, data };
        field.ensure_finite()?;
        Ok(field)
    }

    pub(crate) fn from_raw(grid: Grid, components: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), components * grid.len());
        RealField { grid, components, data }
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        RealField { grid, components, data: vec![0.0; components * grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        RealField { grid, components: 1, data: vec![value; grid.len()] }
    }

    /// Samples a scalar function of position.
    pub fn scalar_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        RealField { grid, components: 1, data }
    }

    /// Samples a vector function of position; `f(x, c)` gives component `c`.
    pub fn vector_fn(grid: Grid, f: impl Fn([f64; 3], usize) -> f64) -> Self {
        let n = grid.len();
        let mut data = Vec::with_capacity(grid.dim() * n);
        for c in 0..grid.dim() {
            data.extend((0..n).map(|j| f(grid.point(j), c)));
        }
        RealField { grid, components: grid.dim(), data }
    }

    /// Concatenates the components of `parts`.
    pub fn stack(parts: &[RealField]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("nothing to stack".into()))?;
        let grid = first.grid;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        for p in parts {
            if p.grid != grid {
                return Err(Error::GridMismatch);
            }
            data.extend_from_slice(&p.data);
        }
        Ok(RealField { grid, components: data.len() / grid.len(), data })
    }

    /// Components `range` as a new field.
    pub fn components_range(&self, range: std::ops::Range<usize>) -> RealField {
        let n = self.grid.len();
        RealField { grid: self.grid, components: range.len(), data: self.data[range.start * n..range.end * n].to_vec() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_scalar(&self) -> bool {
        self.components == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Component `c` as a scalar field.
    pub fn scalar(&self, c: usize) -> RealField {
        RealField { grid: self.grid, components: 1, data: self.component(c).to_vec() }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidInput(format!("non-finite sample at index {i}"))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spatial mean of component `c`.
    pub fn mean(&self, c: usize) -> f64 {
        crate::par::sum(self.component(c)) / self.grid.len() as f64
    }

    /// `∫ f_c dx` by the uniform-grid rule.
    pub fn integral(&self, c: usize) -> f64 {
        crate::par::sum(self.component(c)) * self.grid.cell_volume()
    }

    pub fn same_shape(&self, other: &RealField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.components != other.components {
            return Err(Error::ComponentMismatch { expected: self.components, found: other.components });
        }
        Ok(())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &RealField) {
        debug_assert!(self.same_shape(x).is_ok());
        crate::par::zip_apply(&mut self.data, &x.data, |s, v| *s += a * v);
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> RealField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Maps every sample through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField { grid: self.grid, components: self.components, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Largest absolute sample difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Add for &RealField {
    type Output = RealField;
    fn add(self, rhs: &RealField) -> RealField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &RealField {
    type Output = RealField;
    fn sub(self, rhs: &RealField) -> RealField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &RealField {
    type Output = RealField;
    fn mul(self, rhs: f64) -> RealField {
        self.scaled(rhs)
    }
}

/// Fourier coefficients of a [`RealField`], normalized so that the zero mode
/// equals the spatial mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    components: usize,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, components: usize, data: Vec<Complex64>) -> Result<Self> {
        check_components(components)?;
        if data.len() != components * grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                components * grid.len(),
                data.len()
            )));
        }
        if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(SpectralField { grid, components, data })
    }

    pub(crate) fn from_raw(grid: Grid, components: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), components * grid.len());
        SpectralField { grid, components, data }
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        SpectralField { grid, components, data: vec![Complex64::new(0.0, 0.0); components * grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn scalar(&self, c: usize) -> SpectralField {
        SpectralField { grid: self.grid, components: 1, data: self.component(c).to_vec() }
    }

    /// Coefficient of component `c` at integer mode `m`.
    pub fn coefficient(&self, c: usize, m: [i64; 3]) -> Complex64 {
        let mut idx = [0usize; 3];
        for (a, slot) in idx.iter_mut().enumerate().take(self.grid.dim()) {
            *slot = self.grid.index_of_mode(m[a]);
        }
        self.component(c)[self.grid.flatten(idx)]
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        crate::par::zip_apply(&mut self.data, &x.data, |s, v| *s += v * a);
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// Largest `|c_k - conj(c_{-k})|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for c in 0..self.components {
            let comp = &self.data[c * n..(c + 1) * n];
            for j in 0..n {
                let d = (comp[j] - comp[self.grid.conjugate_index(j)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    /// Zeroes every mode outside the dealiasing ball.
    pub fn truncate(&mut self) {
        let n = self.grid.len();
        let grid = self.grid;
        crate::par::for_each_chunk_mut(&mut self.data, n, |_, comp| {
            for (j, v) in comp.iter_mut().enumerate() {
                if !grid.is_retained(j) {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        });
    }

    /// `Σ |c_k|²` summed over components.
    pub fn energy(&self) -> f64 {
        let sq: Vec<f64> = self.data.iter().map(|c| c.norm_sqr()).collect();
        crate::par::sum(&sq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(2, 8, 1.0).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_bad_components() {
        let g = grid();
        let mut data = vec![0.0; g.len()];
        data[3] = f64::NAN;
        assert!(RealField::new(g, 1, data).is_err());
        assert!(RealField::new(g, 0, vec![]).is_err());
        assert!(RealField::new(g, 3, vec![0.0; 2 * g.len()]).is_err());
        assert!(RealField::new(g, 2, vec![0.0; 2 * g.len()]).is_ok());
    }

    #[test]
    fn stack_and_split() {
        let g = grid();
        let a = RealField::constant(g, 1.0);
        let b = RealField::constant(g, 2.0);
        let v = RealField::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(v.scalar(0), a);
        assert_eq!(v.scalar(1), b);
    }

    #[test]
    fn arithmetic() {
        let g = grid();
        let a = RealField::constant(g, 1.5);
        let b = RealField::constant(g, 0.5);
        assert_eq!((&a - &b).max_abs(), 1.0);
        assert_eq!((&a + &b).mean(0), 2.0);
        assert_eq!((&a * 2.0).integral(0), 3.0);
    }
}
