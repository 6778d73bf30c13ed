use super::{Drive, Recorder, Scheme, TimeStepper};
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::spectral::{leray_type_projection, RealField};

/// `∂_t E = −∇Δ⁻¹div(flux)`. The right-hand side does not depend on `E`, so
/// RK4 reduces to Simpson's rule over each step.
pub fn solve_e_evolution(e0: &RealField, flux: Drive, ts: &TimeStepper) -> Result<TimeSeries<RealField>> {
    ts.require(Scheme::Rk4Explicit)?;
    e0.ensure_finite()?;
    let dim = e0.grid().dim();
    if e0.components() != dim {
        return Err(Error::ComponentMismatch { expected: dim, found: e0.components() });
    }
    if let Some(f) = flux.at(0.0) {
        e0.same_shape(&f)?;
    }
    let steps = ts.steps();
    let h = ts.step_size();
    let mut rec = Recorder::new(ts);
    let mut e = e0.clone();
    rec.push(0.0, e.clone());
    let projected = |t: f64| flux.at(t).map(|f| leray_type_projection(&f)).transpose();
    let mut p_start = projected(0.0)?;
    for step in 0..steps {
        let t = step as f64 * h;
        let (p_mid, p_end) = (projected(t + 0.5 * h)?, projected(t + h)?);
        if let (Some(a), Some(m), Some(b)) = (&p_start, &p_mid, &p_end) {
            e.axpy(-h / 6.0, a);
            e.axpy(-4.0 * h / 6.0, m);
            e.axpy(-h / 6.0, b);
        }
        let t_next = (step + 1) as f64 * h;
        if !e.is_finite() {
            return Err(Error::BlowUp { t: t_next });
        }
        p_start = p_end;
        if rec.wants(step + 1) {
            rec.push(t_next, e.clone());
        }
    }
    rec.finish()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::besov::lp_norm;
    use crate::ensemble::{random_field, FieldSpec};
    use crate::spectral::{curl, gradient, Grid};

    fn stepper() -> TimeStepper {
        TimeStepper::new(0.05, Scheme::Rk4Explicit, 0.5, 2).unwrap()
    }

    #[test]
    fn zero_flux_keeps_e() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let e0 = gradient(&random_field(&g, &FieldSpec::scalar(-2.0, 8.0), 1)).unwrap();
        let out = solve_e_evolution(&e0, Drive::Zero, &stepper()).unwrap();
        assert!(out.snapshots().iter().all(|e| e.max_abs_diff(&e0) == 0.0));
    }

    #[test]
    fn gradient_flux_is_subtracted_linearly() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let e0 = gradient(&random_field(&g, &FieldSpec::scalar(-2.0, 8.0), 1)).unwrap();
        let flux = gradient(&random_field(&g, &FieldSpec::scalar(-1.0, 8.0), 2)).unwrap();
        let out = solve_e_evolution(&e0, Drive::Constant(&flux), &stepper()).unwrap();
        for (t, e) in out.iter() {
            let mut expected = e0.clone();
            expected.axpy(-t, &flux);
            assert!(e.max_abs_diff(&expected) < 1e-13);
        }
    }

    #[test]
    fn random_flux_keeps_e_curl_free() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let e0 = gradient(&random_field(&g, &FieldSpec::scalar(-2.0, 8.0), 3)).unwrap();
        let a = random_field(&g, &FieldSpec::vector(2, -1.0, 8.0), 4);
        let b = random_field(&g, &FieldSpec::vector(2, -2.0, 8.0), 5);
        let flux = |t: f64| {
            let mut f = a.scaled(t.cos());
            f.axpy(t * t, &b);
            f
        };
        let out = solve_e_evolution(&e0, Drive::Function(&flux), &stepper()).unwrap();
        for e in out.snapshots() {
            assert!(lp_norm(&curl(e).unwrap(), 2.0) < 1e-10 * lp_norm(e, 2.0));
        }
    }
}
