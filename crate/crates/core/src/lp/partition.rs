use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::Grid;

/// Inner radius of the dyadic shell (and where `χ` starts to fall).
pub const SHELL_INNER: f64 = 3.0 / 4.0;
/// Outer radius of the dyadic shell.
pub const SHELL_OUTER: f64 = 8.0 / 3.0;
/// Radius of the ball supporting `χ`.
pub const BALL_RADIUS: f64 = 4.0 / 3.0;

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
fn smooth_step(t: f64) -> f64 {
    let a = flat(t);
    let b = flat(1.0 - t);
    a / (a + b)
}

/// Low-frequency cutoff `χ` of the scaled radius `|ξ|`.
pub fn chi(r: f64) -> f64 {
    if r <= SHELL_INNER {
        1.0
    } else if r >= BALL_RADIUS {
        0.0
    } else {
        smooth_step((BALL_RADIUS - r) / (BALL_RADIUS - SHELL_INNER))
    }
}

/// Shell bump `φ(ξ) = χ(ξ/2) − χ(ξ)`, supported in `[3/4, 8/3]`.
pub fn phi(r: f64) -> f64 {
    if !(SHELL_INNER..=SHELL_OUTER).contains(&r) {
        return 0.0;
    }
    chi(0.5 * r) - chi(r)
}

/// Nonhomogeneous dyadic partition of unity on a grid.
///
/// Scaled wavenumbers are the integer mode vectors `ξ = k L / 2π`, so the
/// lowest mode `|m| = 1` sits inside the `q = 0` shell. Block `q` keeps only
/// modes retained by the two-thirds rule, so the blocks sum to the dealiased
/// field exactly.
#[derive(Clone, Debug)]
pub struct DyadicPartition {
    grid: Grid,
    q_max: i32,
    /// `weights[q + 1][j]`: multiplier of block `q` at flat mode `j`.
    weights: Arc<Vec<Vec<f64>>>,
}

impl DyadicPartition {
    pub fn new(grid: Grid) -> Result<Self> {
        let cut = grid.dealias_radius();
        if cut < 1.0 {
            return Err(Error::Config("grid too coarse for any dyadic shell".into()));
        }
        let q_max = cut.log2().floor() as i32;
        if q_max < 0 {
            return Err(Error::Config(format!("grid too coarse: q_max = {q_max}")));
        }
        // The telescoped sum equals χ(2^{-q_max-1} ξ), which is 1 up to 1.5·2^q_max.
        debug_assert!(1.5 * 2f64.powi(q_max) >= cut);
        let radii: Vec<f64> = (0..grid.len()).map(|j| (grid.mode_norm_sq(j) as f64).sqrt()).collect();
        let weights = (-1..=q_max)
            .map(|q| {
                radii
                    .iter()
                    .enumerate()
                    .map(|(j, &r)| if grid.is_retained(j) { Self::profile(q, r) } else { 0.0 })
                    .collect()
            })
            .collect();
        Ok(DyadicPartition { grid, q_max, weights: Arc::new(weights) })
    }

    /// Block profile at scaled radius `r`: `χ(r)` for `q = -1`, else `φ(2^{-q} r)`.
    pub fn profile(q: i32, r: f64) -> f64 {
        if q < 0 {
            chi(r)
        } else {
            phi(r * 2f64.powi(-q))
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn q_max(&self) -> i32 {
        self.q_max
    }

    /// Block indices `-1..=q_max`.
    pub fn blocks(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.q_max
    }

    pub fn num_blocks(&self) -> usize {
        (self.q_max + 2) as usize
    }

    pub fn check_block(&self, q: i32) -> Result<()> {
        if (-1..=self.q_max).contains(&q) {
            Ok(())
        } else {
            Err(Error::BlockOutOfRange { q, min: -1, max: self.q_max })
        }
    }

    /// Multipliers of block `q` over all flat modes. Caller checks the range.
    pub fn weights(&self, q: i32) -> &[f64] {
        &self.weights[(q + 1) as usize]
    }

    /// Designated support `[lo, hi]` of block `q` in scaled radius.
    pub fn support(&self, q: i32) -> (f64, f64) {
        if q < 0 {
            (0.0, BALL_RADIUS)
        } else {
            let s = 2f64.powi(q);
            (SHELL_INNER * s, SHELL_OUTER * s)
        }
    }

    /// Largest `|χ(ξ) + Σ φ(2^{-q}ξ) − 1|` over the retained modes.
    pub fn partition_residual(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&j| self.grid.is_retained(j))
            .map(|j| {
                let s: f64 = self.blocks().map(|q| self.weights(q)[j]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_partition(grid: Grid) -> Result<DyadicPartition> {
    DyadicPartition::new(grid)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn bumps_have_exact_support() {
        assert_eq!(phi(0.5), 0.0);
        assert_eq!(phi(0.75), 0.0);
        assert_eq!(phi(2.7), 0.0);
        assert!(phi(1.0) > 0.0 && phi(2.0) > 0.0);
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(4.0 / 3.0), 0.0);
        assert_eq!(chi(1.5), 0.0);
        for i in 0..=400 {
            let r = i as f64 * 0.01;
            assert!((0.0..=1.0).contains(&chi(r)));
            assert!((0.0..=1.0).contains(&phi(r)));
        }
    }

    #[test]
    fn partition_sums_to_one_on_retained_modes() {
        for (dim, n) in [(1, 64), (2, 128), (3, 32)] {
            let g = Grid::new(dim, n, 2.0 * PI).unwrap();
            let p = build_partition(g).unwrap();
            assert!(p.partition_residual() < 1e-12, "dim {dim} n {n}");
        }
    }

    #[test]
    fn q_max_for_128_axis() {
        let g = Grid::new(2, 128, 2.0 * PI).unwrap();
        let p = build_partition(g).unwrap();
        // Retained radius 128/3 ≈ 42.7; floor(log2) = 5 and 1.5·2^5 = 48 covers it.
        assert_eq!(p.q_max(), 5);
        assert_eq!(p.num_blocks(), 7);
    }

    #[test]
    fn out_of_range_block() {
        let p = build_partition(Grid::new(1, 16, 1.0).unwrap()).unwrap();
        assert!(p.check_block(-2).is_err());
        assert!(p.check_block(p.q_max() + 1).is_err());
        assert!(p.check_block(0).is_ok());
    }
}
