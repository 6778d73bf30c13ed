use serde::Serialize;

use super::diagnostics::check_poisson_constraint;
use super::{mollify_initial, EPState, PhysicalParams};
use crate::besov::{chemin_lerner_norm, critical_index, BesovParams};
use crate::bony::{compose_h1, compose_h2};
use crate::error::{Error, Result};
use crate::lp::DyadicPartition;
use crate::par;
use crate::series::{Interpolation, TimeSeries};
use crate::solvers::{solve_acoustic, solve_e_evolution, solve_heat, AcousticSystem, Drive, Scheme, TimeStepper};
use crate::spectral::{advection, divergence, dot, gradient, laplacian, product, RealField};

/// Right-hand sides built from one snapshot of the previous iterate.
pub(super) struct Sources {
    pub velocity: RealField,
    pub momentum: RealField,
    pub heat: RealField,
    pub flux: RealField,
}

pub(super) fn sources(s: &EPState, params: &PhysicalParams) -> Result<Sources> {
    let gm1 = params.gamma - 1.0;
    let grad_theta = gradient(&s.theta)?;
    let grad_rho = gradient(&s.rho)?;
    // −∇θ − θ∇ρ + E − u
    let mut momentum = product(&s.theta, &grad_rho)?;
    momentum.axpy(1.0, &grad_theta);
    momentum.scale(-1.0);
    momentum.axpy(1.0, &s.e);
    momentum.axpy(-1.0, &s.u);
    // −u·∇θ ± h₁(ρ)Δθ − (γ−1)(T_L+θ)div u + (γ−1)/2 |u|² − θ
    let h1 = compose_h1(&s.rho, params.gamma, params.kappa, params.n_bar)?;
    let div_u = divergence(&s.u)?;
    let mut heat = advection(&s.u, &s.theta)?.scaled(-1.0);
    heat.axpy(params.thermal_coupling.sign(), &product(&h1, &laplacian(&s.theta))?);
    heat.axpy(-gm1 * params.t_l, &div_u);
    heat.axpy(-gm1, &product(&s.theta, &div_u)?);
    heat.axpy(0.5 * gm1, &dot(&s.u, &s.u)?);
    heat.axpy(-1.0, &s.theta);
    // h₂(ρ)u + n̄u
    let mut flux = product(&compose_h2(&s.rho, params.n_bar)?, &s.u)?;
    flux.axpy(params.n_bar, &s.u);
    Ok(Sources { velocity: s.u.clone(), momentum, heat, flux })
}

fn component(ts: &TimeSeries<EPState>, f: fn(&EPState) -> &RealField) -> TimeSeries<RealField> {
    ts.map(|s| f(s).clone())
}

fn summed<'a>(
    a: &'a TimeSeries<RealField>,
    b: Option<&'a TimeSeries<RealField>>,
    sign_b: f64,
    mode: Interpolation,
) -> impl Fn(f64) -> RealField + Sync + 'a {
    move |t| {
        let mut out = a.sample(t, mode);
        if let Some(b) = b {
            out.axpy(sign_b, &b.sample(t, mode));
        }
        out
    }
}

fn as_divergence(m: usize, e: Error) -> Error {
    match e {
        Error::BlowUp { t } => Error::Divergence { m, reason: format!("blow-up at t = {t:.6}") },
        other => other,
    }
}

/// Iterate `m + 1` from iterate `m`: the coupled `(ρ, u)` transport, the heat
/// equation and the `E`-evolution, each linear with coefficients and sources
/// frozen at `prev`, started from `S_{m+1}` of the data. `forcing`, when
/// given, is added to the four right-hand sides; it must hold snapshots at
/// every half step so that stage times fall on its nodes.
pub fn picard_step(
    prev: &TimeSeries<EPState>,
    data0: &EPState,
    m: usize,
    params: &PhysicalParams,
    ts: &TimeStepper,
    partition: &DyadicPartition,
    forcing: Option<&TimeSeries<EPState>>,
) -> Result<TimeSeries<EPState>> {
    let init = mollify_initial(data0, m, partition)?;
    let src = prev.try_map(|s| sources(s, params))?;
    let mode = ts.interpolation;
    let velocity = src.map(|s| s.velocity.clone());
    let momentum = src.map(|s| s.momentum.clone());
    let heat = src.map(|s| s.heat.clone());
    let flux = src.map(|s| s.flux.clone());
    drop(src);
    let forced = forcing.map(|f| {
        (component(f, |s| &s.rho), component(f, |s| &s.u), component(f, |s| &s.theta), component(f, |s| &s.e))
    });
    let exact = Interpolation::Cubic;
    let g_rho = forced.as_ref().map(|f| &f.0);
    let src_u = summed(&momentum, forced.as_ref().map(|f| &f.1), 1.0, mode);
    let src_heat = summed(&heat, forced.as_ref().map(|f| &f.2), 1.0, mode);
    // The E equation reads E_t = −P(flux) + G_E with G_E a gradient, so G_E
    // enters as −G_E in the projected flux.
    let src_flux = summed(&flux, forced.as_ref().map(|f| &f.3), -1.0, mode);
    let rk = ts.with_scheme(Scheme::Rk4Explicit);
    let ex = ts.with_scheme(Scheme::ExponentialRk4);
    let system = AcousticSystem {
        sound_speed_sq: params.t_l,
        velocity: Drive::Series(&velocity, mode),
        source_rho: g_rho.map_or(Drive::Zero, |g| Drive::Series(g, exact)),
        source_u: Drive::Function(&src_u),
    };
    let kt = params.kappa_tilde();
    let (acoustic, (theta, e)) = par::join(
        || solve_acoustic(&init.rho, &init.u, &system, &rk),
        || {
            par::join(
                || solve_heat(&init.theta, kt, Drive::Function(&src_heat), &ex),
                || solve_e_evolution(&init.e, Drive::Function(&src_flux), &rk),
            )
        },
    );
    let (acoustic, theta, e) = (
        acoustic.map_err(|x| as_divergence(m + 1, x))?,
        theta.map_err(|x| as_divergence(m + 1, x))?,
        e.map_err(|x| as_divergence(m + 1, x))?,
    );
    let d = init.grid().dim();
    let (times, ac) = acoustic.into_parts();
    let (_, th) = theta.into_parts();
    let (_, ef) = e.into_parts();
    let states = ac
        .into_iter()
        .zip(th)
        .zip(ef)
        .zip(&times)
        .map(|(((a, theta), e), &t)| EPState {
            rho: a.components_range(0..1),
            u: a.components_range(1..1 + d),
            theta,
            e,
            time: t,
        })
        .collect();
    TimeSeries::new(times, states)
}

fn cl_inf(ts: &TimeSeries<EPState>, f: fn(&EPState) -> &RealField, s: f64, p: &DyadicPartition) -> Result<f64> {
    chemin_lerner_norm(&component(ts, f), &BesovParams::l2_sum(s), f64::INFINITY, p)
}

/// `‖(ρ, u, E)‖_{L̃^∞_T(B^σ_{2,1})} + ‖θ‖_{L̃^∞_T(B^{σ+1}_{2,1})}`.
pub fn uniform_bound(ts: &TimeSeries<EPState>, p: &DyadicPartition) -> Result<f64> {
    let sigma = critical_index(p.grid().dim());
    Ok(cl_inf(ts, |s| &s.rho, sigma, p)?
        + cl_inf(ts, |s| &s.u, sigma, p)?
        + cl_inf(ts, |s| &s.e, sigma, p)?
        + cl_inf(ts, |s| &s.theta, sigma + 1.0, p)?)
}

/// `‖(δρ, δu, δE)‖_{L̃^∞_T(B^{σ−1}_{2,1})} + ‖δθ‖_{L̃^∞_T(B^σ_{2,1})}` between
/// two series, evaluated at the snapshot times of `a`.
pub fn delta_metric(a: &TimeSeries<EPState>, b: &TimeSeries<EPState>, p: &DyadicPartition) -> Result<f64> {
    let diff = a.map(|s| s.difference(&b.sample(s.time, Interpolation::Cubic)));
    let sigma = critical_index(p.grid().dim());
    Ok(cl_inf(&diff, |s| &s.rho, sigma - 1.0, p)?
        + cl_inf(&diff, |s| &s.u, sigma - 1.0, p)?
        + cl_inf(&diff, |s| &s.e, sigma - 1.0, p)?
        + cl_inf(&diff, |s| &s.theta, sigma, p)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationOptions {
    pub max_m: usize,
    /// Successive-difference threshold in the `δ` metric.
    pub tol: f64,
    /// Full iterates kept in the trace; older ones keep only their norms.
    pub retain: usize,
    /// Smallest `m` at which convergence may be declared; defaults to
    /// `q_max + 1`, where mollification of the data saturates.
    pub min_m: Option<usize>,
    /// Consecutive `δ` increases that count as divergence.
    pub growth_limit: usize,
    /// Horizon halvings attempted by [`run_with_retry`].
    pub halvings: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions { max_m: 20, tol: 1e-10, retain: 12, min_m: None, growth_limit: 3, halvings: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "contraction")]
    Contraction,
    #[serde(rename = "nonconvergent")]
    Nonconvergent,
    #[serde(rename = "no iterations")]
    NoIterations,
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    /// Retained iterates `(m, series)`, oldest first.
    pub iterates: Vec<(usize, TimeSeries<EPState>)>,
    /// Step-two norm of iterate `m` at index `m − 1`.
    pub uniform_bound_history: Vec<f64>,
    /// `δ_m = ‖x^m − x^{m−1}‖` at index `m − 1`.
    pub delta_history: Vec<f64>,
    /// Largest Poisson-constraint residual of iterate `m` at index `m − 1`.
    pub constraint_residuals: Vec<f64>,
    /// Uniform-bound norm of the data.
    pub data_norm: f64,
    pub t_end: f64,
    pub halvings: usize,
    pub verdict: Verdict,
    pub failure: Option<String>,
}

impl IterationTrace {
    pub fn last(&self) -> Option<&TimeSeries<EPState>> {
        self.iterates.last().map(|x| &x.1)
    }

    pub fn iterations(&self) -> usize {
        self.delta_history.len()
    }

    /// `δ_{m+1}/δ_m` for `m = 1, 2, …`, as `(m, ratio)`.
    pub fn ratios(&self) -> Vec<(usize, f64)> {
        self.delta_history
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i + 1, if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }))
            .collect()
    }

    pub fn converged(&self) -> bool {
        self.verdict == Verdict::Contraction
    }
}

/// Runs the Picard iteration from the zero iterate until the `δ` metric drops
/// below `tol` (at `m >= min_m`), `max_m` is reached, or `δ` grows for
/// `growth_limit` consecutive iterates.
pub fn run_iteration(
    data0: &EPState,
    params: &PhysicalParams,
    ts: &TimeStepper,
    partition: &DyadicPartition,
    opts: &IterationOptions,
    forcing: Option<&TimeSeries<EPState>>,
) -> Result<IterationTrace> {
    params.validate()?;
    ts.validate()?;
    data0.validate()?;
    if opts.retain == 0 {
        return Err(Error::Config("retain must be at least 1".into()));
    }
    let min_m = opts.min_m.unwrap_or(partition.q_max() as usize + 1);
    let mut trace = IterationTrace {
        iterates: Vec::new(),
        uniform_bound_history: Vec::new(),
        delta_history: Vec::new(),
        constraint_residuals: Vec::new(),
        data_norm: uniform_bound(&TimeSeries::constant(data0.clone()), partition)?,
        t_end: ts.t_end,
        halvings: 0,
        verdict: Verdict::NoIterations,
        failure: None,
    };
    let mut prev = TimeSeries::constant(EPState::zeros(*data0.grid()));
    let mut rises = 0;
    for m in 0..opts.max_m {
        let next = match picard_step(&prev, data0, m, params, ts, partition, forcing) {
            Ok(x) => x,
            Err(Error::Divergence { m, reason }) => {
                trace.verdict = Verdict::Nonconvergent;
                trace.failure = Some(format!("iterate {m}: {reason}"));
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        let delta = delta_metric(&next, &prev, partition)?;
        let bound = uniform_bound(&next, partition)?;
        let poisson = check_poisson_constraint(&next, params)?.into_iter().fold(0.0, f64::max);
        log::info!("iterate {}: bound {bound:.6e}, delta {delta:.6e}", m + 1);
        if let Some(&last) = trace.delta_history.last() {
            rises = if delta > last { rises + 1 } else { 0 };
        }
        trace.delta_history.push(delta);
        trace.uniform_bound_history.push(bound);
        trace.constraint_residuals.push(poisson);
        trace.iterates.push((m + 1, next.clone()));
        if trace.iterates.len() > opts.retain {
            trace.iterates.remove(0);
        }
        if !delta.is_finite() || !bound.is_finite() {
            trace.verdict = Verdict::Nonconvergent;
            trace.failure = Some(format!("iterate {}: non-finite norms", m + 1));
            return Ok(trace);
        }
        if rises >= opts.growth_limit {
            trace.verdict = Verdict::Nonconvergent;
            trace.failure = Some(format!("delta grew for {rises} consecutive iterates; try a smaller T"));
            return Ok(trace);
        }
        if delta == 0.0 || (delta < opts.tol && m + 1 >= min_m) {
            trace.verdict = Verdict::Contraction;
            return Ok(trace);
        }
        prev = next;
    }
    trace.verdict = Verdict::Nonconvergent;
    trace.failure = Some(format!("no convergence within {} iterates; try a smaller T", opts.max_m));
    Ok(trace)
}

/// [`run_iteration`], halving `T` after each nonconvergent attempt.
pub fn run_with_retry(
    data0: &EPState,
    params: &PhysicalParams,
    ts: &TimeStepper,
    partition: &DyadicPartition,
    opts: &IterationOptions,
    forcing: Option<&TimeSeries<EPState>>,
) -> Result<IterationTrace> {
    let mut stepper = *ts;
    let mut halvings = 0;
    loop {
        let mut trace = run_iteration(data0, params, &stepper, partition, opts, forcing)?;
        trace.halvings = halvings;
        if trace.converged() || halvings >= opts.halvings {
            return Ok(trace);
        }
        log::warn!("nonconvergent at T = {}; halving", stepper.t_end);
        stepper.t_end *= 0.5;
        halvings += 1;
    }
}
