//! Fourier multipliers and the differential / nonlocal operators built on them.
//!
//! Odd multipliers (anything carrying a single factor of `k`) are zeroed on
//! Nyquist modes, whose conjugate partner is the mode itself.

use num_complex::Complex64;

use super::fft::{forward, inverse};
use super::field::{RealField, SpectralField};
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::par;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative mean below which a source counts as neutral for `Δ⁻¹`.
pub const MEAN_TOLERANCE: f64 = 1e-10;

/// Multiplies every component of `f` pointwise by `m(k)`.
pub fn apply_multiplier<M>(f: &SpectralField, m: M) -> Result<SpectralField>
where
    M: Fn([f64; 3]) -> Complex64 + Sync,
{
    let grid = *f.grid();
    let n = grid.len();
    let weights = par::map_range(n, |j| m(grid.wavevector(j)));
    if let Some(j) = weights.iter().position(|w| !(w.re.is_finite() && w.im.is_finite())) {
        return Err(Error::OperatorDefinition { k: grid.wavevector(j) });
    }
    let mut out = f.clone();
    par::for_each_chunk_mut(out.data_mut(), n, |_, comp| {
        comp.iter_mut().zip(&weights).for_each(|(c, w)| *c *= w);
    });
    Ok(out)
}

/// In-place real-valued multiplier on one spectral component, indexed by flat mode.
fn scale_modes(grid: &Grid, comp: &mut [Complex64], w: impl Fn(usize) -> Complex64 + Sync) {
    let g = *grid;
    par::for_each_chunk_mut(comp, g.points_per_axis(), |chunk, vals| {
        let base = chunk * g.points_per_axis();
        for (o, v) in vals.iter_mut().enumerate() {
            *v *= w(base + o);
        }
    });
}

fn require_scalar(f: &RealField) -> Result<()> {
    if f.is_scalar() {
        Ok(())
    } else {
        Err(Error::ComponentMismatch { expected: 1, found: f.components() })
    }
}

fn require_vector(f: &RealField) -> Result<()> {
    let dim = f.grid().dim();
    if f.components() == dim {
        Ok(())
    } else {
        Err(Error::ComponentMismatch { expected: dim, found: f.components() })
    }
}

/// Spectral gradient of each scalar component: component `c` of the input
/// yields `dim` components of the output (only used with scalar input).
pub(crate) fn grad_hat(f: &SpectralField) -> SpectralField {
    let grid = *f.grid();
    let n = grid.len();
    let dim = grid.dim();
    let mut out = SpectralField::zeros(grid, dim);
    for a in 0..dim {
        let dst = out.component_mut(a);
        dst.copy_from_slice(f.component(0));
        scale_modes(&grid, dst, |j| if grid.is_nyquist(j) { Complex64::default() } else { I * grid.wavevector(j)[a] });
    }
    debug_assert_eq!(out.data().len(), dim * n);
    out
}

pub(crate) fn div_hat(u: &SpectralField) -> SpectralField {
    let grid = *u.grid();
    let mut out = SpectralField::zeros(grid, 1);
    for a in 0..grid.dim() {
        let mut comp = u.component(a).to_vec();
        scale_modes(&grid, &mut comp, |j| if grid.is_nyquist(j) { Complex64::default() } else { I * grid.wavevector(j)[a] });
        par::zip_apply(out.component_mut(0), &comp, |o, v| *o += v);
    }
    out
}

pub(crate) fn laplacian_hat(f: &SpectralField) -> SpectralField {
    let grid = *f.grid();
    let mut out = f.clone();
    let n = grid.len();
    for c in 0..f.components() {
        scale_modes(&grid, &mut out.data_mut()[c * n..(c + 1) * n], |j| {
            let k = grid.wavevector(j);
            Complex64::new(-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]), 0.0)
        });
    }
    out
}

/// `∇Δ⁻¹` applied to a scalar spectrum, zero mode dropped.
pub(crate) fn inv_lap_grad_hat(f: &SpectralField) -> SpectralField {
    let grid = *f.grid();
    let dim = grid.dim();
    let mut out = SpectralField::zeros(grid, dim);
    for a in 0..dim {
        let dst = out.component_mut(a);
        dst.copy_from_slice(f.component(0));
        scale_modes(&grid, dst, |j| {
            let k = grid.wavevector(j);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if j == 0 || grid.is_nyquist(j) {
                Complex64::default()
            } else {
                -I * k[a] / k2
            }
        });
    }
    out
}

/// `∇Δ⁻¹div` on a vector spectrum.
pub(crate) fn projection_hat(u: &SpectralField) -> SpectralField {
    inv_lap_grad_hat(&div_hat(u))
}

/// Zeroes modes outside the two-thirds ball.
pub fn dealias(f: &RealField) -> RealField {
    let mut s = forward(f);
    s.truncate();
    inverse(&s)
}

pub fn gradient(f: &RealField) -> Result<RealField> {
    require_scalar(f)?;
    Ok(inverse(&grad_hat(&forward(f))))
}

pub fn divergence(u: &RealField) -> Result<RealField> {
    require_vector(u)?;
    Ok(inverse(&div_hat(&forward(u))))
}

/// Componentwise Laplacian.
pub fn laplacian(f: &RealField) -> RealField {
    inverse(&laplacian_hat(&forward(f)))
}

/// Warning raised when `Δ⁻¹` is applied to a source with nonzero mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeutralityWarning {
    pub mean: f64,
    pub tolerance: f64,
}

/// `∇Δ⁻¹ f` with the zero mode set to zero. A non-neutral source is still
/// processed (its mean is annihilated) but reported back.
pub fn inverse_laplacian_gradient(f: &RealField) -> Result<(RealField, Option<NeutralityWarning>)> {
    require_scalar(f)?;
    let s = forward(f);
    let mean = s.data()[0].re;
    let tolerance = MEAN_TOLERANCE * f.max_abs().max(f64::MIN_POSITIVE);
    let warning = (mean.abs() > tolerance).then(|| {
        log::warn!("inverse Laplacian of a source with mean {mean:.3e}; zero mode dropped");
        NeutralityWarning { mean, tolerance }
    });
    Ok((inverse(&inv_lap_grad_hat(&s)), warning))
}

/// `∇Δ⁻¹div u`: the mean-free curl-free part of `u`.
pub fn leray_type_projection(u: &RealField) -> Result<RealField> {
    require_vector(u)?;
    Ok(inverse(&projection_hat(&forward(u))))
}

/// Curl of a vector field: zero components in 1-D, the scalar
/// `∂₀u₁ − ∂₁u₀` in 2-D, the usual vector in 3-D.
pub fn curl(u: &RealField) -> Result<RealField> {
    require_vector(u)?;
    let grid = *u.grid();
    let s = forward(u);
    let d = |a: usize, c: usize| -> SpectralField {
        let g = grad_hat(&s.scalar(c));
        g.scalar(a)
    };
    match grid.dim() {
        1 => Ok(RealField::zeros(grid, 1)),
        2 => {
            let mut w = d(0, 1);
            w.axpy(-1.0, &d(1, 0));
            Ok(inverse(&w))
        }
        _ => {
            let mut parts = Vec::with_capacity(3);
            for (a, b) in [(1, 2), (2, 0), (0, 1)] {
                let mut w = d(a, b);
                w.axpy(-1.0, &d(b, a));
                parts.push(inverse(&w));
            }
            RealField::stack(&parts)
        }
    }
}

/// Dealiased pointwise product. Scalar × vector broadcasts the scalar.
pub fn product(a: &RealField, b: &RealField) -> Result<RealField> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let raw = match (a.components(), b.components()) {
        (x, y) if x == y => {
            let data = a.data().iter().zip(b.data()).map(|(p, q)| p * q).collect();
            RealField::from_raw(*a.grid(), x, data)
        }
        (1, _) => broadcast(a, b),
        (_, 1) => broadcast(b, a),
        (x, y) => return Err(Error::ComponentMismatch { expected: x, found: y }),
    };
    Ok(dealias(&raw))
}

fn broadcast(s: &RealField, v: &RealField) -> RealField {
    let n = s.grid().len();
    let mut data = v.data().to_vec();
    for chunk in data.chunks_mut(n) {
        chunk.iter_mut().zip(s.data()).for_each(|(x, y)| *x *= y);
    }
    RealField::from_raw(*s.grid(), v.components(), data)
}

/// Dealiased `u·v` of two vector fields.
pub fn dot(u: &RealField, v: &RealField) -> Result<RealField> {
    require_vector(u)?;
    u.same_shape(v)?;
    let n = u.grid().len();
    let mut data = vec![0.0; n];
    for c in 0..u.components() {
        data.iter_mut().zip(u.component(c).iter().zip(v.component(c))).for_each(|(d, (x, y))| *d += x * y);
    }
    Ok(dealias(&RealField::from_raw(*u.grid(), 1, data)))
}

/// Dealiased `(v·∇)a`, applied componentwise to `a`.
pub fn advection(v: &RealField, a: &RealField) -> Result<RealField> {
    require_vector(v)?;
    if v.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *a.grid();
    let n = grid.len();
    let spec = forward(a);
    let mut raw = vec![0.0; a.components() * n];
    for c in 0..a.components() {
        let g = inverse(&grad_hat(&spec.scalar(c)));
        let dst = &mut raw[c * n..(c + 1) * n];
        for d in 0..grid.dim() {
            dst.iter_mut()
                .zip(v.component(d).iter().zip(g.component(d)))
                .for_each(|(o, (vv, gg))| *o += vv * gg);
        }
    }
    Ok(dealias(&RealField::from_raw(grid, a.components(), raw)))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::fft::{fft_forward, fft_inverse};

    fn smooth_random(grid: Grid, comps: usize, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..comps * grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        dealias(&RealField::new(grid, comps, data).unwrap())
    }

    fn rel(a: &RealField, b: &RealField) -> f64 {
        a.max_abs_diff(b) / b.max_abs().max(1e-300)
    }

    #[test]
    fn identity_and_derivative_multipliers() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let f = RealField::scalar_fn(g, |x| (3.0 * x[0]).sin());
        let s = fft_forward(&f).unwrap();
        let same = fft_inverse(&apply_multiplier(&s, |_| Complex64::new(1.0, 0.0)).unwrap()).unwrap();
        assert!(same.max_abs_diff(&f) < 1e-14);
        let d = fft_inverse(&apply_multiplier(&s, |k| I * k[0]).unwrap()).unwrap();
        let exact = RealField::scalar_fn(g, |x| 3.0 * (3.0 * x[0]).cos());
        assert!(d.max_abs_diff(&exact) < 1e-12);
        let lap = fft_inverse(&apply_multiplier(&s, |k| Complex64::new(-(k[0] * k[0] + k[1] * k[1]), 0.0)).unwrap())
            .unwrap();
        assert!(lap.max_abs_diff(&f.scaled(-9.0)) < 1e-12);
    }

    #[test]
    fn non_finite_multiplier_is_rejected() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let s = SpectralField::zeros(g, 1);
        let r = apply_multiplier(&s, |k| Complex64::new(1.0 / (k[0] * k[0] + k[1] * k[1]), 0.0));
        assert!(matches!(r, Err(Error::OperatorDefinition { .. })));
    }

    #[test]
    fn gradient_divergence_laplacian() {
        let g = Grid::new(2, 32, 3.0).unwrap();
        assert_eq!(gradient(&RealField::constant(g, 2.0)).unwrap().max_abs(), 0.0);
        let f = smooth_random(g, 1, 1);
        let dg = divergence(&gradient(&f).unwrap()).unwrap();
        assert!(rel(&dg, &laplacian(&f)) < 1e-12);
        let k = 2.0 * PI / 3.0;
        let c = RealField::scalar_fn(g, |x| (k * x[0]).cos());
        assert!(rel(&laplacian(&c), &c.scaled(-k * k)) < 1e-12);
        assert!(gradient(&RealField::zeros(g, 2)).is_err());
        assert!(divergence(&f).is_err());
    }

    #[test]
    fn inverse_laplacian_gradient_inverts_divergence() {
        let g = Grid::new(2, 32, 2.0).unwrap();
        let (z, w) = inverse_laplacian_gradient(&RealField::zeros(g, 1)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert!(w.is_none());
        let f = smooth_random(g, 1, 2);
        let mut centered = f.clone();
        let mean = f.mean(0);
        centered.data_mut().iter_mut().for_each(|v| *v -= mean);
        let (e, _) = inverse_laplacian_gradient(&f).unwrap();
        assert!(rel(&divergence(&e).unwrap(), &centered) < 1e-12);
        assert!(curl(&e).unwrap().max_abs() < 1e-12 * e.max_abs());
        let (c, warn) = inverse_laplacian_gradient(&RealField::constant(g, 1.0)).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        assert!(warn.is_some());
    }

    #[test]
    fn projection_is_idempotent_and_kills_solenoidal_fields() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let u = smooth_random(g, 2, 3);
        let p = leray_type_projection(&u).unwrap();
        let pp = leray_type_projection(&p).unwrap();
        assert!(rel(&pp, &p) < 1e-12);
        let sol = RealField::vector_fn(g, |x, c| if c == 0 { -(x[1]).sin() } else { 0.0 });
        assert!(leray_type_projection(&sol).unwrap().max_abs() < 1e-12);
        let f = smooth_random(g, 1, 4);
        let gr = gradient(&f).unwrap();
        assert!(rel(&leray_type_projection(&gr).unwrap(), &gr) < 1e-12);
    }

    #[test]
    fn products_are_dealiased() {
        let g = Grid::new(1, 32, 2.0 * PI).unwrap();
        let a = RealField::scalar_fn(g, |x| (8.0 * x[0]).cos());
        // cos² = (1 + cos 16x)/2; mode 16 lies outside the ball of radius 32/3.
        let p = product(&a, &a).unwrap();
        assert!(p.data().iter().all(|v| (v - 0.5).abs() < 1e-14));
    }

    #[test]
    fn advection_of_tone() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let v = RealField::vector_fn(g, |_, c| if c == 0 { 2.0 } else { -1.0 });
        let a = RealField::scalar_fn(g, |x| (x[0] + 2.0 * x[1]).sin());
        let adv = advection(&v, &a).unwrap();
        let exact = RealField::scalar_fn(g, |x| (2.0 - 2.0) * (x[0] + 2.0 * x[1]).cos());
        assert!(adv.max_abs_diff(&exact) < 1e-12);
    }
}
