use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, L)^N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    box_length: f64,
}

/// Serialized form of [`Grid`]; validated on conversion.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::new(s.dim, s.points_per_axis, s.box_length)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { dim: g.dim, points_per_axis: g.points_per_axis, box_length: g.box_length }
    }
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Config(format!("box length must be positive, got {box_length}")));
        }
        Ok(Grid { dim, points_per_axis, box_length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Total number of grid points, `n^N`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dim as i32)
    }

    /// Lowest nonzero physical wavenumber `2π/L`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Signed mode number of FFT index `i` along one axis.
    #[inline]
    pub fn mode_number(&self, i: usize) -> i64 {
        let n = self.points_per_axis;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// FFT index of signed mode number `m` along one axis.
    #[inline]
    pub fn index_of_mode(&self, m: i64) -> usize {
        m.rem_euclid(self.points_per_axis as i64) as usize
    }

    /// Per-axis indices of flat index `j` (axis 0 varies slowest).
    #[inline]
    pub fn unflatten(&self, mut j: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut idx = [0usize; 3];
        for a in (0..self.dim).rev() {
            idx[a] = j % n;
            j /= n;
        }
        idx
    }

    #[inline]
    pub fn flatten(&self, idx: [usize; 3]) -> usize {
        let n = self.points_per_axis;
        (0..self.dim).fold(0, |acc, a| acc * n + idx[a])
    }

    /// Integer mode vector of flat spectral index `j`; unused axes are zero.
    #[inline]
    pub fn mode(&self, j: usize) -> [i64; 3] {
        let idx = self.unflatten(j);
        let mut m = [0i64; 3];
        for a in 0..self.dim {
            m[a] = self.mode_number(idx[a]);
        }
        m
    }

    /// Physical wavevector `k = (2π/L) m` of flat spectral index `j`.
    #[inline]
    pub fn wavevector(&self, j: usize) -> [f64; 3] {
        let m = self.mode(j);
        let k0 = self.fundamental();
        [k0 * m[0] as f64, k0 * m[1] as f64, k0 * m[2] as f64]
    }

    /// `|m|²` of flat spectral index `j`.
    #[inline]
    pub fn mode_norm_sq(&self, j: usize) -> i64 {
        let m = self.mode(j);
        m[0] * m[0] + m[1] * m[1] + m[2] * m[2]
    }

    /// Whether any axis of mode `j` sits on the Nyquist index.
    #[inline]
    pub fn is_nyquist(&self, j: usize) -> bool {
        let idx = self.unflatten(j);
        (0..self.dim).any(|a| idx[a] == self.points_per_axis / 2)
    }

    /// Radial two-thirds rule: keep modes with `|m| <= n/3`.
    #[inline]
    pub fn is_retained(&self, j: usize) -> bool {
        let n = self.points_per_axis as i64;
        9 * self.mode_norm_sq(j) <= n * n
    }

    /// Largest retained `|m|` (the dealiasing radius in mode units).
    pub fn dealias_radius(&self) -> f64 {
        self.points_per_axis as f64 / 3.0
    }

    /// Largest retained physical wavenumber.
    pub fn k_max(&self) -> f64 {
        self.fundamental() * self.dealias_radius()
    }

    /// Flat index of the mode `-m` for the mode at `j`.
    #[inline]
    pub fn conjugate_index(&self, j: usize) -> usize {
        let idx = self.unflatten(j);
        let n = self.points_per_axis;
        let mut c = [0usize; 3];
        for a in 0..self.dim {
            c[a] = (n - idx[a]) % n;
        }
        self.flatten(c)
    }

    /// Physical coordinates of grid point `j`.
    #[inline]
    pub fn point(&self, j: usize) -> [f64; 3] {
        let idx = self.unflatten(j);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = idx[a] as f64 * h;
        }
        x
    }

    /// Same grid with a different resolution.
    pub fn with_points(&self, points_per_axis: usize) -> Result<Self> {
        Grid::new(self.dim, points_per_axis, self.box_length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(2, 6, 1.0).is_err());
        assert!(Grid::new(2, 12, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(2, 16, -1.0).is_err());
        assert!(Grid::new(2, 16, 1.0).is_ok());
    }

    #[test]
    fn flatten_round_trips() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for j in 0..g.len() {
            assert_eq!(g.flatten(g.unflatten(j)), j);
        }
    }

    #[test]
    fn conjugate_negates_mode() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        for j in 0..g.len() {
            if g.is_nyquist(j) {
                continue;
            }
            let m = g.mode(j);
            let c = g.mode(g.conjugate_index(j));
            assert_eq!([-m[0], -m[1], -m[2]], c);
        }
    }

    #[test]
    fn dealias_radius_excludes_nyquist() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        assert!((0..g.len()).filter(|&j| g.is_nyquist(j)).all(|j| !g.is_retained(j)));
    }

    #[test]
    fn grid_json_validates() {
        let bad: std::result::Result<Grid, _> =
            serde_json::from_str(r#"{"dim":2,"points_per_axis":10,"box_length":1.0}"#);
        assert!(bad.is_err());
        let ok: Grid =
            serde_json::from_str(r#"{"dim":2,"points_per_axis":16,"box_length":1.0}"#).unwrap();
        assert_eq!(ok.len(), 256);
    }
}
