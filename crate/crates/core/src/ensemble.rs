//! Seeded random band-limited fields.
//!
//! Coefficients are drawn over integer modes in a fixed, grid-independent
//! order, so one seed describes the same trigonometric polynomial on every
//! grid whose dealiasing ball contains the band.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::fft::inverse;
use crate::spectral::{Grid, RealField, SpectralField};

/// Spectral slopes the ensembles draw from.
pub const SLOPES: [f64; 3] = [-1.0, -2.0, -3.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    /// 1 for scalar, `dim` for vector.
    pub components: usize,
    /// Coefficient magnitudes scale like `|m|^slope`.
    pub slope: f64,
    /// Band radius in mode units: only `1 <= |m| <= band` are populated.
    pub band: f64,
}

impl FieldSpec {
    pub fn scalar(slope: f64, band: f64) -> Self {
        FieldSpec { components: 1, slope, band }
    }

    pub fn vector(dim: usize, slope: f64, band: f64) -> Self {
        FieldSpec { components: dim, slope, band }
    }
}

/// Lexicographically positive integer modes with `1 <= |m| <= band`.
fn half_space_modes(dim: usize, band: f64) -> Vec<[i64; 3]> {
    let r = band.floor() as i64;
    let mut out = Vec::new();
    let range = |a: usize| if a < dim { -r..=r } else { 0..=0 };
    for m0 in range(0) {
        for m1 in range(1) {
            for m2 in range(2) {
                let m = [m0, m1, m2];
                let n2 = (m0 * m0 + m1 * m1 + m2 * m2) as f64;
                if n2 == 0.0 || n2.sqrt() > band {
                    continue;
                }
                let positive = m0 > 0 || (m0 == 0 && (m1 > 0 || (m1 == 0 && m2 > 0)));
                if positive {
                    out.push(m);
                }
            }
        }
    }
    out
}

/// Random field with unit root-mean-square value per component.
pub fn random_field(grid: &Grid, spec: &FieldSpec, seed: u64) -> RealField {
    try_random_field(grid, spec, seed).expect("band exceeds the dealiasing radius")
}

pub fn try_random_field(grid: &Grid, spec: &FieldSpec, seed: u64) -> Result<RealField> {
    if spec.band > grid.dealias_radius() {
        return Err(Error::Config(format!(
            "band {} exceeds the dealiasing radius {:.2}",
            spec.band,
            grid.dealias_radius()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = half_space_modes(grid.dim(), spec.band);
    let mut s = SpectralField::zeros(*grid, spec.components);
    for c in 0..spec.components {
        let mut energy = 0.0;
        let mut coeffs = Vec::with_capacity(modes.len());
        for m in &modes {
            let r = ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
            let amp = r.powf(spec.slope) * rng.gen_range(0.5..1.5);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = Complex64::from_polar(amp, phase);
            energy += 2.0 * z.norm_sqr();
            coeffs.push(z);
        }
        let norm = if energy > 0.0 { energy.sqrt().recip() } else { 0.0 };
        let comp = s.component_mut(c);
        for (m, z) in modes.iter().zip(coeffs) {
            let mut idx = [0usize; 3];
            let mut neg = [0usize; 3];
            for a in 0..grid.dim() {
                idx[a] = grid.index_of_mode(m[a]);
                neg[a] = grid.index_of_mode(-m[a]);
            }
            comp[grid.flatten(idx)] = z * norm;
            comp[grid.flatten(neg)] = z.conj() * norm;
        }
    }
    Ok(inverse(&s))
}

/// Ensemble member `index`: slope drawn from [`SLOPES`], then a field.
pub fn ensemble_member(grid: &Grid, components: usize, band: f64, seed: u64, index: usize) -> RealField {
    let member_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(member_seed);
    let slope = SLOPES[rng.gen_range(0..SLOPES.len())];
    random_field(grid, &FieldSpec { components, slope, band }, member_seed ^ 0x5EED)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::fft::forward;

    #[test]
    fn same_seed_same_function_across_grids() {
        let coarse = Grid::new(2, 32, 2.0 * PI).unwrap();
        let fine = Grid::new(2, 64, 2.0 * PI).unwrap();
        let spec = FieldSpec::scalar(-2.0, 8.0);
        let a = random_field(&coarse, &spec, 11);
        let b = random_field(&fine, &spec, 11);
        // Every other fine sample coincides with a coarse sample.
        for i in 0..32 {
            for j in 0..32 {
                let va = a.data()[coarse.flatten([i, j, 0])];
                let vb = b.data()[fine.flatten([2 * i, 2 * j, 0])];
                assert!((va - vb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn band_and_normalization() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let f = random_field(&g, &FieldSpec::vector(2, -1.0, 6.0), 3);
        let s = forward(&f);
        for c in 0..2 {
            let energy: f64 = s.component(c).iter().map(|z| z.norm_sqr()).sum();
            assert!((energy - 1.0).abs() < 1e-12);
        }
        for j in 0..g.len() {
            if (g.mode_norm_sq(j) as f64).sqrt() > 6.0 {
                assert!(s.data()[j].norm() < 1e-14);
            }
        }
        assert!(try_random_field(&g, &FieldSpec::scalar(-1.0, 20.0), 1).is_err());
    }

    #[test]
    fn deterministic() {
        let g = Grid::new(3, 16, 1.0).unwrap();
        assert_eq!(ensemble_member(&g, 1, 5.0, 4, 2), ensemble_member(&g, 1, 5.0, 4, 2));
        assert_ne!(ensemble_member(&g, 1, 5.0, 4, 2), ensemble_member(&g, 1, 5.0, 4, 3));
    }
}
