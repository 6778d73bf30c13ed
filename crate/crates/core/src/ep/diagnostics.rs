use serde::Serialize;

use super::picard::sources;
use super::{from_transformed, EPState, PhysicalParams};
use crate::besov::lp_norm;
use crate::bony::compose_h2;
use crate::ensemble::{random_field, FieldSpec};
use crate::error::{Error, Result};
use crate::series::{Interpolate, TimeSeries};
use crate::solvers::TimeStepper;
use crate::spectral::{
    advection, dealias, divergence, dot, gradient, inverse_laplacian_gradient, laplacian, leray_type_projection,
    product, Grid, RealField,
};

/// `E = ∇Δ⁻¹h₂(ρ)`, with the dealiased composition.
pub fn poisson_field(rho: &RealField, params: &PhysicalParams) -> Result<RealField> {
    Ok(inverse_laplacian_gradient(&compose_h2(rho, params.n_bar)?)?.0)
}

/// Per snapshot, `‖E − ∇Δ⁻¹(n̄e^ρ − n̄)‖₂ / max(‖E‖₂, ε)`.
pub fn check_poisson_constraint(series: &TimeSeries<EPState>, params: &PhysicalParams) -> Result<Vec<f64>> {
    series
        .snapshots()
        .iter()
        .map(|s| {
            let target = poisson_field(&s.rho, params)?;
            let num = lp_norm(&(&s.e - &target), 2.0);
            Ok(num / lp_norm(&s.e, 2.0).max(f64::MIN_POSITIVE))
        })
        .collect()
}

/// Right-hand side `F(x)` of the transformed system `∂_t x = F(x)`.
pub fn ep_operator(state: &EPState, params: &PhysicalParams) -> Result<EPState> {
    let src = sources(state, params)?;
    let mut rho = advection(&state.u, &state.rho)?.scaled(-1.0);
    rho.axpy(-1.0, &divergence(&state.u)?);
    let mut u = src.momentum;
    u.axpy(-1.0, &advection(&state.u, &state.u)?);
    u.axpy(-params.t_l, &gradient(&state.rho)?);
    let mut theta = src.heat;
    theta.axpy(params.kappa_tilde(), &laplacian(&state.theta));
    let e = leray_type_projection(&src.flux)?.scaled(-1.0);
    Ok(EPState { rho, u, theta, e, time: state.time })
}

/// Fourth-order central differences need this many snapshots.
const STENCIL: usize = 5;

fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < STENCIL {
        return Err(Error::Quadrature { needed: STENCIL, got: times.len() });
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::InvalidInput("residuals need equally spaced snapshots".into()));
    }
    Ok(h)
}

/// `∂_t` at interior snapshot `i` by the five-point stencil.
fn derivative<T: Interpolate>(values: &[T], i: usize, h: f64) -> T {
    let c = 1.0 / (12.0 * h);
    T::weighted_sum(&[
        (c, &values[i - 2]),
        (-8.0 * c, &values[i - 1]),
        (8.0 * c, &values[i + 1]),
        (-c, &values[i + 2]),
    ])
}

/// L² residual per equation at the interior snapshots.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub equations: Vec<String>,
    pub times: Vec<f64>,
    /// `residuals[e][i]`: equation `e` at `times[i]`.
    pub residuals: Vec<Vec<f64>>,
}

impl ResidualReport {
    fn new(equations: &[&str], rows: Vec<(f64, Vec<f64>)>) -> Self {
        let mut residuals = vec![Vec::with_capacity(rows.len()); equations.len()];
        let mut times = Vec::with_capacity(rows.len());
        for (t, r) in rows {
            times.push(t);
            r.into_iter().zip(residuals.iter_mut()).for_each(|(v, col)| col.push(v));
        }
        ResidualReport { equations: equations.iter().map(|s| s.to_string()).collect(), times, residuals }
    }

    pub fn max_per_equation(&self) -> Vec<f64> {
        self.residuals.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect()
    }

    pub fn max(&self) -> f64 {
        self.max_per_equation().into_iter().fold(0.0, f64::max)
    }
}

/// Residuals of `∂_t x − F(x) − G` for the transformed system, with `G` the
/// optional forcing sampled at the snapshot times.
pub fn residual_check(
    series: &TimeSeries<EPState>,
    params: &PhysicalParams,
    forcing: Option<&TimeSeries<EPState>>,
) -> Result<ResidualReport> {
    let h = uniform_spacing(series.times())?;
    let snaps = series.snapshots();
    let idx: Vec<usize> = (2..snaps.len() - 2).collect();
    let rows = crate::par::map_slice(&idx, |&i| -> Result<(f64, Vec<f64>)> {
        let mut r = derivative(snaps, i, h).difference(&ep_operator(&snaps[i], params)?);
        if let Some(g) = forcing {
            r = r.difference(&g.sample(series.times()[i], crate::series::Interpolation::Cubic));
        }
        Ok((series.times()[i], [&r.rho, &r.u, &r.theta, &r.e].iter().map(|f| lp_norm(f, 2.0)).collect()))
    });
    Ok(ResidualReport::new(&["rho", "u", "theta", "E"], rows.into_iter().collect::<Result<_>>()?))
}

/// Residuals of the physical system in `(n, u, 𝒯, Φ)` after back-conversion:
/// continuity, momentum and temperature equations multiplied through by `n`,
/// and the Poisson equation.
pub fn physical_residuals(series: &TimeSeries<EPState>, params: &PhysicalParams) -> Result<ResidualReport> {
    let h = uniform_spacing(series.times())?;
    let phys = series.snapshots().iter().map(|s| from_transformed(s, params)).collect::<Result<Vec<_>>>()?;
    let n_s: Vec<RealField> = phys.iter().map(|p| p.n.clone()).collect();
    let u_s: Vec<RealField> = phys.iter().map(|p| p.u.clone()).collect();
    let t_s: Vec<RealField> = phys.iter().map(|p| p.temperature.clone()).collect();
    let gm1 = params.gamma - 1.0;
    let idx: Vec<usize> = (2..phys.len() - 2).collect();
    let rows = crate::par::map_slice(&idx, |&i| -> Result<(f64, Vec<f64>)> {
        let p = &phys[i];
        let (n, u, temp) = (&p.n, &p.u, &p.temperature);
        let div_u = divergence(u)?;
        let mut r_n = derivative(&n_s, i, h);
        r_n.axpy(1.0, &divergence(&product(n, u)?)?);
        let mut r_u = product(n, &derivative(&u_s, i, h))?;
        r_u.axpy(1.0, &product(n, &advection(u, u)?)?);
        r_u.axpy(1.0, &gradient(&product(n, temp)?)?);
        r_u.axpy(-1.0, &product(n, &p.e)?);
        r_u.axpy(1.0, &product(n, u)?);
        let mut r_t = product(n, &derivative(&t_s, i, h))?;
        r_t.axpy(1.0, &product(n, &advection(u, temp)?)?);
        r_t.axpy(gm1, &product(n, &product(temp, &div_u)?)?);
        r_t.axpy(-gm1 * params.kappa, &laplacian(temp));
        r_t.axpy(-0.5 * gm1, &product(n, &dot(u, u)?)?);
        r_t.axpy(1.0, &product(n, &temp.map(|v| v - params.t_l))?);
        let mut r_phi = laplacian(&p.phi);
        r_phi.axpy(-1.0, &dealias(&n.map(|v| v - params.n_bar)));
        let mean = r_phi.mean(0);
        r_phi.data_mut().iter_mut().for_each(|v| *v -= mean);
        Ok((series.times()[i], [&r_n, &r_u, &r_t, &r_phi].iter().map(|f| lp_norm(f, 2.0)).collect()))
    });
    Ok(ResidualReport::new(&["n", "u", "T", "Phi"], rows.into_iter().collect::<Result<_>>()?))
}

/// `max_t |∫n(t) − ∫n(0)| / |∫n(0)|`.
pub fn mass_drift(series: &TimeSeries<EPState>, params: &PhysicalParams) -> f64 {
    let mass = |s: &EPState| s.rho.map(|r| params.n_bar * r.exp()).integral(0);
    let m0 = mass(&series.snapshots()[0]);
    series.snapshots().iter().map(|s| ((mass(s) - m0) / m0).abs()).fold(0.0, f64::max)
}

/// Quadratic-in-time state `x*(t) = c₀ + t c₁ + t² c₂` with smooth random
/// coefficients, and the forcing `G = ∂_t x* − F(x*)` that makes it an exact
/// solution of the forced system.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub coefficients: [EPState; 3],
}

impl Manufactured {
    pub fn new(grid: Grid, amplitude: f64, seed: u64) -> Result<Self> {
        let d = grid.dim();
        let band = 4.0f64.min(grid.dealias_radius());
        let member = |k: u64| -> Result<EPState> {
            let s = seed.wrapping_mul(16).wrapping_add(4 * k);
            let scalar = |j: u64| random_field(&grid, &FieldSpec::scalar(-2.0, band), s + j).scaled(amplitude);
            let (e, _) = inverse_laplacian_gradient(&scalar(3))?;
            Ok(EPState {
                rho: scalar(0),
                u: random_field(&grid, &FieldSpec::vector(d, -2.0, band), s + 1).scaled(amplitude),
                theta: scalar(2),
                e,
                time: 0.0,
            })
        };
        Ok(Manufactured { coefficients: [member(0)?, member(1)?, member(2)?] })
    }

    pub fn exact(&self, t: f64) -> EPState {
        let [c0, c1, c2] = &self.coefficients;
        let mut s = EPState::weighted_sum(&[(1.0, c0), (t, c1), (t * t, c2)]);
        s.time = t;
        s
    }

    fn derivative(&self, t: f64) -> EPState {
        let [_, c1, c2] = &self.coefficients;
        EPState::weighted_sum(&[(1.0, c1), (2.0 * t, c2)])
    }

    pub fn series(&self, times: &[f64]) -> Result<TimeSeries<EPState>> {
        TimeSeries::new(times.to_vec(), times.iter().map(|&t| self.exact(t)).collect())
    }

    /// `G` on every half step of `ts`, so all Runge–Kutta stage times are nodes.
    pub fn forcing(&self, params: &PhysicalParams, ts: &TimeStepper) -> Result<TimeSeries<EPState>> {
        let n = 2 * ts.steps();
        let h = 0.5 * ts.step_size();
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let states = crate::par::map_slice(&times, |&t| -> Result<EPState> {
            let mut g = self.derivative(t).difference(&ep_operator(&self.exact(t), params)?);
            g.time = t;
            Ok(g)
        });
        TimeSeries::new(times, states.into_iter().collect::<Result<_>>()?)
    }
}
