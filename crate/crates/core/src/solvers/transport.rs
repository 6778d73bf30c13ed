use super::{Drive, Recorder, Scheme, TimeStepper};
use crate::besov::lp_norm;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::spectral::fft::{forward, inverse};
use crate::spectral::operators::{div_hat, grad_hat};
use crate::spectral::{advection, RealField, SpectralField};

/// Largest pointwise speed `max |v|`.
pub fn max_speed(v: &RealField) -> f64 {
    lp_norm(v, f64::INFINITY)
}

/// Coupled `(ρ, u)` system
/// `ρ_t + v·∇ρ + div u = f_ρ`, `u_t + T_L ∇ρ + (v·∇)u = f_u`,
/// advanced as one state with `1 + N` components.
#[derive(Clone, Copy)]
pub struct AcousticSystem<'a> {
    pub sound_speed_sq: f64,
    pub velocity: Drive<'a>,
    pub source_rho: Drive<'a>,
    pub source_u: Drive<'a>,
}

fn check_cfl(h: f64, speed: f64, a: &RealField, ts: &TimeStepper) -> Result<()> {
    let kmax = a.grid().k_max();
    if speed <= 0.0 {
        return Ok(());
    }
    let max_dt = ts.cfl_safety / (speed * kmax);
    if h > max_dt * (1.0 + 1e-12) {
        let suggested = ts.t_end / (ts.t_end / max_dt).ceil();
        return Err(Error::Cfl { dt: h, max_dt, suggested });
    }
    Ok(())
}

fn check_drive(d: &Drive, a: &RealField, components: Option<usize>) -> Result<()> {
    if let Some(f) = d.at(0.0) {
        if f.grid() != a.grid() {
            return Err(Error::GridMismatch);
        }
        let expected = components.unwrap_or(a.components());
        if f.components() != expected {
            return Err(Error::ComponentMismatch { expected, found: f.components() });
        }
    }
    Ok(())
}

/// Drive values at the start, midpoint and end of one step.
struct StageSamples {
    start: Option<RealField>,
    mid: Option<RealField>,
    end: Option<RealField>,
}

fn stage_samples(d: &Drive, t: f64, h: f64, carried: Option<RealField>) -> StageSamples {
    if d.is_zero() {
        return StageSamples { start: None, mid: None, end: None };
    }
    let start = carried.or_else(|| d.at(t));
    StageSamples { start, mid: d.at(t + 0.5 * h), end: d.at(t + h) }
}

/// Classical RK4 with state-independent drives sampled at `t`, `t + h/2`, `t + h`.
fn rk4_run<F>(a0: &RealField, ts: &TimeStepper, drives: &[Drive], speed_floor: f64, has_velocity: bool, rhs: F) -> Result<TimeSeries<RealField>>
where
    F: Fn(&RealField, &[Option<&RealField>]) -> Result<RealField>,
{
    let n = ts.steps();
    let h = ts.step_size();
    let mut rec = Recorder::new(ts);
    let mut a = a0.clone();
    rec.push(0.0, a.clone());
    let mut carried: Vec<Option<RealField>> = vec![None; drives.len()];
    for step in 0..n {
        let t = step as f64 * h;
        let samples: Vec<StageSamples> =
            drives.iter().zip(carried.iter_mut()).map(|(d, c)| stage_samples(d, t, h, c.take())).collect();
        if has_velocity {
            let s = &samples[0];
            let speed = [&s.start, &s.mid, &s.end].iter().filter_map(|x| x.as_ref()).map(max_speed).fold(0.0, f64::max);
            check_cfl(h, speed + speed_floor, &a, ts)?;
        } else {
            check_cfl(h, speed_floor, &a, ts)?;
        }
        let pick = |which: usize| -> Vec<Option<&RealField>> {
            samples
                .iter()
                .map(|s| match which {
                    0 => s.start.as_ref(),
                    1 => s.mid.as_ref(),
                    _ => s.end.as_ref(),
                })
                .collect()
        };
        let (d0, dm, d1) = (pick(0), pick(1), pick(2));
        let k1 = rhs(&a, &d0)?;
        let k2 = rhs(&(&a + &k1.scaled(0.5 * h)), &dm)?;
        let k3 = rhs(&(&a + &k2.scaled(0.5 * h)), &dm)?;
        let k4 = rhs(&(&a + &k3.scaled(h)), &d1)?;
        a.axpy(h / 6.0, &k1);
        a.axpy(h / 3.0, &k2);
        a.axpy(h / 3.0, &k3);
        a.axpy(h / 6.0, &k4);
        let t_next = (step + 1) as f64 * h;
        if !a.is_finite() {
            return Err(Error::BlowUp { t: t_next });
        }
        for (c, s) in carried.iter_mut().zip(samples) {
            *c = s.end;
        }
        if rec.wants(step + 1) {
            rec.push(t_next, a.clone());
        }
    }
    rec.finish()
}

/// `∂_t a + v·∇a = f` by RK4 with spectral derivatives and dealiased products.
pub fn solve_transport(a0: &RealField, v: Drive, forcing: Drive, ts: &TimeStepper) -> Result<TimeSeries<RealField>> {
    ts.require(Scheme::Rk4Explicit)?;
    a0.ensure_finite()?;
    let dim = a0.grid().dim();
    check_drive(&v, a0, Some(dim))?;
    check_drive(&forcing, a0, None)?;
    let has_v = !v.is_zero();
    rk4_run(a0, ts, &[v, forcing], 0.0, has_v, |a, d| {
        let mut out = match d[0] {
            Some(v) => advection(v, a)?.scaled(-1.0),
            None => RealField::zeros(*a.grid(), a.components()),
        };
        if let Some(f) = d[1] {
            out.axpy(1.0, f);
        }
        Ok(out)
    })
}

fn split_hat(s: &SpectralField) -> (SpectralField, SpectralField) {
    let n = s.grid().len();
    let rho = SpectralField::from_raw(*s.grid(), 1, s.data()[..n].to_vec());
    let u = SpectralField::from_raw(*s.grid(), s.components() - 1, s.data()[n..].to_vec());
    (rho, u)
}

/// Solves the coupled acoustic transport system; returns stacked `[ρ, u]` snapshots.
pub fn solve_acoustic(
    rho0: &RealField,
    u0: &RealField,
    sys: &AcousticSystem,
    ts: &TimeStepper,
) -> Result<TimeSeries<RealField>> {
    ts.require(Scheme::Rk4Explicit)?;
    let dim = rho0.grid().dim();
    if !rho0.is_scalar() {
        return Err(Error::ComponentMismatch { expected: 1, found: rho0.components() });
    }
    if u0.components() != dim {
        return Err(Error::ComponentMismatch { expected: dim, found: u0.components() });
    }
    if !(sys.sound_speed_sq >= 0.0) {
        return Err(Error::Config(format!("T_L must be nonnegative, got {}", sys.sound_speed_sq)));
    }
    let state0 = RealField::stack(&[rho0.clone(), u0.clone()])?;
    state0.ensure_finite()?;
    check_drive(&sys.velocity, rho0, Some(dim))?;
    check_drive(&sys.source_rho, rho0, Some(1))?;
    check_drive(&sys.source_u, rho0, Some(dim))?;
    let c = sys.sound_speed_sq;
    let n = rho0.grid().len();
    let has_v = !sys.velocity.is_zero();
    rk4_run(&state0, ts, &[sys.velocity, sys.source_rho, sys.source_u], c.sqrt(), has_v, |a, d| {
        let (rho_hat, u_hat) = split_hat(&forward(a));
        let mut out = match d[0] {
            Some(v) => advection(v, a)?.scaled(-1.0),
            None => RealField::zeros(*a.grid(), a.components()),
        };
        let div_u = inverse(&div_hat(&u_hat));
        let grad_rho = inverse(&grad_hat(&rho_hat));
        let data = out.data_mut();
        data[..n].iter_mut().zip(div_u.data()).for_each(|(o, x)| *o -= x);
        data[n..].iter_mut().zip(grad_rho.data()).for_each(|(o, x)| *o -= c * x);
        if let Some(f) = d[1] {
            data[..n].iter_mut().zip(f.data()).for_each(|(o, x)| *o += x);
        }
        if let Some(f) = d[2] {
            data[n..].iter_mut().zip(f.data()).for_each(|(o, x)| *o += x);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::ensemble::{random_field, FieldSpec};
    use crate::spectral::Grid;

    fn stepper(dt: f64, t_end: f64) -> TimeStepper {
        TimeStepper::new(dt, Scheme::Rk4Explicit, t_end, 1).unwrap()
    }

    #[test]
    fn constant_forcing_accumulates_linearly() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let a0 = random_field(&g, &FieldSpec::scalar(-2.0, 8.0), 1);
        let f = random_field(&g, &FieldSpec::scalar(-1.0, 8.0), 2);
        let out = solve_transport(&a0, Drive::Zero, Drive::Constant(&f), &stepper(0.1, 1.0)).unwrap();
        let mut expected = a0.clone();
        expected.axpy(1.0, &f);
        assert!(out.last().max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn cfl_refusal_suggests_a_step() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let a0 = RealField::scalar_fn(g, |x| x[0].sin());
        let v = RealField::vector_fn(g, |_, c| if c == 0 { 1.0 } else { 0.0 });
        match solve_transport(&a0, Drive::Constant(&v), Drive::Zero, &stepper(0.2, 1.0)) {
            Err(Error::Cfl { suggested, max_dt, .. }) => assert!(suggested <= max_dt),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn translation_by_constant_velocity() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let a0 = RealField::scalar_fn(g, |x| (x[0] + 2.0 * x[1]).cos());
        let v = RealField::vector_fn(g, |_, c| if c == 0 { 0.5 } else { 0.25 });
        let t = 0.4;
        let out = solve_transport(&a0, Drive::Constant(&v), Drive::Zero, &stepper(0.005, t)).unwrap();
        let exact = RealField::scalar_fn(g, |x| (x[0] - 0.5 * t + 2.0 * (x[1] - 0.25 * t)).cos());
        assert!(out.last().max_abs_diff(&exact) < 1e-9);
    }

    #[test]
    fn acoustic_standing_wave() {
        // ρ = cos(kx) cos(ωt), u = (sin(kx) sin(ωt) ω/k, 0), ω = k sqrt(T_L).
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let tl: f64 = 2.0;
        let k = 3.0;
        let w = k * tl.sqrt();
        let rho0 = RealField::scalar_fn(g, |x| (k * x[0]).cos());
        let u0 = RealField::zeros(g, 2);
        let sys = AcousticSystem { sound_speed_sq: tl, velocity: Drive::Zero, source_rho: Drive::Zero, source_u: Drive::Zero };
        let t = 0.3;
        let out = solve_acoustic(&rho0, &u0, &sys, &stepper(0.002, t)).unwrap();
        let last = out.last();
        let n = g.len();
        let mut err: f64 = 0.0;
        for j in 0..n {
            let x = g.point(j);
            err = err.max((last.data()[j] - (k * x[0]).cos() * (w * t).cos()).abs());
            err = err.max((last.data()[n + j] - (k * x[0]).sin() * (w * t).sin() * tl.sqrt()).abs());
            err = err.max(last.data()[2 * n + j].abs());
        }
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn mean_conserved_for_divergence_free_velocity() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let a0 = random_field(&g, &FieldSpec::scalar(-2.0, 8.0), 3);
        let mut a0 = a0;
        a0.data_mut().iter_mut().for_each(|x| *x += 1.0);
        // v = ∇^⊥ψ is divergence free.
        let v = RealField::vector_fn(g, |x, c| if c == 0 { (x[1]).cos() * 0.3 } else { (x[0]).sin() * 0.3 });
        let out = solve_transport(&a0, Drive::Constant(&v), Drive::Zero, &stepper(0.01, 0.5)).unwrap();
        let m0 = a0.integral(0);
        for (_, a) in out.iter() {
            assert!((a.integral(0) - m0).abs() < 1e-10 * m0.abs());
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let g = Grid::new(1, 16, 2.0 * PI).unwrap();
        let a0 = RealField::constant(g, 1.0);
        let f = |t: f64| RealField::constant(g, if t > 0.25 { f64::NAN } else { 0.0 });
        let out = solve_transport(&a0, Drive::Zero, Drive::Function(&f), &stepper(0.1, 1.0));
        assert!(matches!(out, Err(Error::BlowUp { .. })));
    }
}
