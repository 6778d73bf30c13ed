use num_complex::Complex64;
use serde::Serialize;

use super::{Drive, Recorder, Scheme, TimeStepper};
use crate::besov::{besov_norm, chemin_lerner_norm, BesovParams};
use crate::error::{Error, Result};
use crate::lp::DyadicPartition;
use crate::series::{Interpolation, TimeSeries};
use crate::spectral::fft::{forward, inverse};
use crate::spectral::{RealField, SpectralField};

/// `(φ₁(x), φ₂(x), φ₃(x))` with `φ_k(x) = Σ_j x^j/(j+k)!`.
pub fn phi_functions(x: f64) -> (f64, f64, f64) {
    if x.abs() < 1.0 {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            // Terms x^j/(j+k+1)!, summed from the smallest.
            let mut term = 1.0;
            for i in 1..=(k + 1) {
                term /= i as f64;
            }
            let mut terms = Vec::with_capacity(24);
            for j in 0..24 {
                terms.push(term);
                term *= x / (j + k + 2) as f64;
            }
            *o = terms.iter().rev().sum();
        }
        (out[0], out[1], out[2])
    } else {
        let e = x.exp();
        let p1 = (e - 1.0) / x;
        let p2 = (e - 1.0 - x) / (x * x);
        let p3 = (e - 1.0 - x - 0.5 * x * x) / (x * x * x);
        (p1, p2, p3)
    }
}

/// Per-mode propagator and quadrature weights for one step of size `h`.
struct HeatWeights {
    decay: Vec<f64>,
    w0: Vec<f64>,
    wm: Vec<f64>,
    w1: Vec<f64>,
}

impl HeatWeights {
    fn new(grid: &crate::spectral::Grid, kappa: f64, h: f64) -> Self {
        let n = grid.len();
        let mut w = HeatWeights { decay: vec![0.0; n], w0: vec![0.0; n], wm: vec![0.0; n], w1: vec![0.0; n] };
        for j in 0..n {
            let k = grid.wavevector(j);
            let x = -kappa * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * h;
            let (p1, p2, p3) = phi_functions(x);
            let (m0, m1, m2) = (p1, p2, 2.0 * p3);
            w.decay[j] = x.exp();
            w.w0[j] = h * (2.0 * m2 - 3.0 * m1 + m0);
            w.wm[j] = h * (-4.0 * m2 + 4.0 * m1);
            w.w1[j] = h * (2.0 * m2 - m1);
        }
        w
    }
}

/// `∂_t θ − κ̃Δθ = f` with the diffusion propagated exactly by `e^{−κ̃|k|²t}`.
/// The source is integrated exactly on its quadratic interpolant through the
/// start, midpoint and end of each step.
pub fn solve_heat(theta0: &RealField, kappa_tilde: f64, forcing: Drive, ts: &TimeStepper) -> Result<TimeSeries<RealField>> {
    ts.require(Scheme::ExponentialRk4)?;
    if !(kappa_tilde > 0.0 && kappa_tilde.is_finite()) {
        return Err(Error::Config(format!("heat conductivity must be positive, got {kappa_tilde}")));
    }
    theta0.ensure_finite()?;
    if let Some(f) = forcing.at(0.0) {
        theta0.same_shape(&f)?;
    }
    let grid = *theta0.grid();
    let n = grid.len();
    let steps = ts.steps();
    let h = ts.step_size();
    let w = HeatWeights::new(&grid, kappa_tilde, h);
    let mut rec = Recorder::new(ts);
    let mut s = forward(theta0);
    rec.push(0.0, theta0.clone());
    let hat = |t: f64| forcing.at(t).map(|f| forward(&f));
    let mut f_start: Option<SpectralField> = hat(0.0);
    for step in 0..steps {
        let t = step as f64 * h;
        let (f_mid, f_end) = (hat(t + 0.5 * h), hat(t + h));
        for c in 0..s.components() {
            let range = c * n..(c + 1) * n;
            let dst = &mut s.data_mut()[range.clone()];
            dst.iter_mut().zip(&w.decay).for_each(|(z, e)| *z *= e);
            if let (Some(a), Some(m), Some(b)) = (&f_start, &f_mid, &f_end) {
                let (a, m, b) = (&a.data()[range.clone()], &m.data()[range.clone()], &b.data()[range]);
                for j in 0..n {
                    dst[j] += a[j] * w.w0[j] + m[j] * w.wm[j] + b[j] * w.w1[j];
                }
            }
        }
        let t_next = (step + 1) as f64 * h;
        if s.data().iter().any(|z: &Complex64| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BlowUp { t: t_next });
        }
        f_start = f_end;
        if rec.wants(step + 1) {
            rec.push(t_next, inverse(&s));
        }
    }
    rec.finish()
}

/// Both sides of the smoothing estimate
/// `κ̃‖θ‖_{L̃¹_T(B^{s+2}_{2,1})} ≤ C (1+T)(‖θ₀‖_{B^s_{2,1}} + ‖f‖_{L̃¹_T(B^s_{2,1})})`.
#[derive(Clone, Debug, Serialize)]
pub struct HeatWitness {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

pub fn heat_estimate_witness(
    theta0: &RealField,
    kappa_tilde: f64,
    forcing: &TimeSeries<RealField>,
    ts: &TimeStepper,
    s: f64,
    partition: &DyadicPartition,
) -> Result<HeatWitness> {
    let sol = solve_heat(theta0, kappa_tilde, Drive::Series(forcing, Interpolation::Cubic), ts)?;
    let t_end = ts.t_end;
    let lhs = kappa_tilde * chemin_lerner_norm(&sol, &BesovParams::l2_sum(s + 2.0), 1.0, partition)?;
    let data = besov_norm(theta0, &BesovParams::l2_sum(s), partition).value;
    let src = chemin_lerner_norm(forcing, &BesovParams::l2_sum(s), 1.0, partition)?;
    let rhs = (1.0 + t_end) * (data + src);
    Ok(HeatWitness { s, lhs, rhs, constant: if lhs == 0.0 { 0.0 } else { lhs / rhs } })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::besov::lp_norm;
    use crate::ensemble::{random_field, FieldSpec};
    use crate::spectral::Grid;

    fn stepper(dt: f64, t_end: f64) -> TimeStepper {
        TimeStepper::new(dt, Scheme::ExponentialRk4, t_end, 1).unwrap()
    }

    #[test]
    fn phi_functions_match_closed_forms() {
        for &x in &[-40.0, -3.0, -1.0, -0.999, -0.5, -1e-3, 0.0, 1e-6, 0.7] {
            let (a, b, c) = phi_functions(x);
            if x == 0.0 {
                assert_eq!((a, b, c), (1.0, 0.5, 1.0 / 6.0));
                continue;
            }
            // Independent check by quadrature of ∫₀¹ e^{(1−s)x} s^{k−1}/(k−1)! ds.
            let m = 20000;
            let quad = |k: i32| -> f64 {
                let f = |s: f64| ((1.0 - s) * x).exp() * s.powi(k - 1) / [1.0, 1.0, 2.0][(k - 1) as usize];
                let hq = 1.0 / m as f64;
                (0..=m)
                    .map(|i| {
                        let wgt = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                        wgt * f(i as f64 * hq)
                    })
                    .sum::<f64>()
                    * hq
                    / 3.0
            };
            for (k, v) in [(1, a), (2, b), (3, c)] {
                let q = quad(k);
                assert!((v - q).abs() < 1e-10 * q.abs().max(1e-3), "x = {x}, k = {k}: {v} vs {q}");
            }
        }
    }

    #[test]
    fn eigenmode_decay_is_exact_for_any_step() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let theta0 = RealField::scalar_fn(g, |x| (3.0 * x[0] + 4.0 * x[1]).cos());
        let kappa = 7.0;
        for dt in [0.3, 0.01] {
            let t = 0.6;
            let out = solve_heat(&theta0, kappa, Drive::Zero, &stepper(dt, t)).unwrap();
            let exact = theta0.scaled((-kappa * 25.0 * t).exp());
            assert!(out.last().max_abs_diff(&exact) < 1e-12);
        }
    }

    #[test]
    fn constant_source_grows_zero_mode() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let c = RealField::constant(g, 0.7);
        let out = solve_heat(&RealField::zeros(g, 1), 3.0, Drive::Constant(&c), &stepper(0.05, 1.0)).unwrap();
        for (t, th) in out.iter() {
            assert!(th.data().iter().all(|v| (v - 0.7 * t).abs() < 1e-14));
        }
    }

    #[test]
    fn energy_never_increases_without_source() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let theta0 = random_field(&g, &FieldSpec::scalar(-1.0, 10.0), 4);
        let out = solve_heat(&theta0, 0.2, Drive::Zero, &stepper(0.01, 0.5)).unwrap();
        let norms: Vec<f64> = out.snapshots().iter().map(|f| lp_norm(f, 2.0)).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn forced_problem_converges_at_high_order() {
        // θ = sin(t) cos(x + 2y) solves θ_t − κΔθ = (cos t + 5κ sin t) cos(x + 2y).
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let kappa = 0.8;
        let shape = RealField::scalar_fn(g, |x| (x[0] + 2.0 * x[1]).cos());
        let src = |t: f64| shape.scaled(t.cos() + 5.0 * kappa * t.sin());
        let t = 1.0;
        let err = |dt: f64| {
            let out = solve_heat(&RealField::zeros(g, 1), kappa, Drive::Function(&src), &stepper(dt, t)).unwrap();
            out.last().max_abs_diff(&shape.scaled(t.sin()))
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 7.2, "{e1} {e2}");
        assert!(matches!(solve_heat(&shape, 0.0, Drive::Zero, &stepper(0.1, 1.0)), Err(Error::Config(_))));
    }
}
