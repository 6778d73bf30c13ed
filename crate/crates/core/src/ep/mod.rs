//! The transformed Euler–Poisson system with heat conduction and its Picard
//! iteration: variable change, mollified data, linear iterates and monitors.

mod diagnostics;
mod picard;
mod uniqueness;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{s_q, DyadicPartition};
use crate::series::Interpolate;
use crate::solvers::Snapshot;
use crate::spectral::fft::{forward, inverse};
use crate::spectral::{apply_multiplier, inverse_laplacian_gradient, Grid, RealField};

pub use diagnostics::{
    check_poisson_constraint, ep_operator, mass_drift, physical_residuals, poisson_field, residual_check, Manufactured,
    ResidualReport,
};
pub use picard::{
    delta_metric, picard_step, run_iteration, run_with_retry, uniform_bound, IterationOptions, IterationTrace,
    Verdict,
};
pub use uniqueness::{perturbed, uniqueness_experiment, UniquenessReport};

/// Sign in front of `h₁(ρ)Δθ` on the right of the temperature equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalCoupling {
    /// `+h₁(ρ)Δθ`.
    #[default]
    AsWritten,
    /// `−h₁(ρ)Δθ`, the sign obtained by dividing the physical temperature
    /// equation by `n = n̄e^ρ`.
    EnergyConsistent,
}

impl ThermalCoupling {
    pub fn sign(self) -> f64 {
        match self {
            ThermalCoupling::AsWritten => 1.0,
            ThermalCoupling::EnergyConsistent => -1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub gamma: f64,
    pub kappa: f64,
    pub n_bar: f64,
    #[serde(rename = "T_L")]
    pub t_l: f64,
    #[serde(default = "one")]
    pub tau_p: f64,
    #[serde(default = "one")]
    pub tau_w: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub thermal_coupling: ThermalCoupling,
}

impl PhysicalParams {
    /// `γ = 5/3`, `n̄ = 1`, `T_L = 1`, and `κ` such that `κ̃ = (1 + T)/T`.
    pub fn for_horizon(t_end: f64) -> Self {
        let gamma = 5.0 / 3.0;
        let n_bar = 1.0;
        PhysicalParams {
            gamma,
            kappa: (1.0 + t_end) / t_end * n_bar / (gamma - 1.0),
            n_bar,
            t_l: 1.0,
            tau_p: 1.0,
            tau_w: 1.0,
            lambda: 1.0,
            thermal_coupling: ThermalCoupling::default(),
        }
    }

    /// Same parameters with `κ` chosen to give the requested `κ̃`.
    pub fn with_kappa_tilde(mut self, kappa_tilde: f64) -> Self {
        self.kappa = kappa_tilde * self.n_bar / (self.gamma - 1.0);
        self
    }

    /// `κ̃ = (γ − 1)κ/n̄`.
    pub fn kappa_tilde(&self) -> f64 {
        (self.gamma - 1.0) * self.kappa / self.n_bar
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} = {v} is out of range")));
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad("gamma", self.gamma);
        }
        for (what, v) in [("kappa", self.kappa), ("n_bar", self.n_bar), ("T_L", self.t_l)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(what, v);
            }
        }
        for (what, v) in [("tau_p", self.tau_p), ("tau_w", self.tau_w), ("lambda", self.lambda)] {
            if v != 1.0 {
                return Err(Error::Config(format!("{what} = {v}: only unit relaxation times and Debye length are supported")));
            }
        }
        Ok(())
    }
}

/// State `(ρ, u, θ, E) = (ln n − ln n̄, u, 𝒯 − 𝒯_L, ∇Φ)` at one time.
#[derive(Clone, Debug)]
pub struct EPState {
    pub rho: RealField,
    pub u: RealField,
    pub theta: RealField,
    pub e: RealField,
    pub time: f64,
}

impl EPState {
    pub fn zeros(grid: Grid) -> Self {
        let d = grid.dim();
        EPState {
            rho: RealField::zeros(grid, 1),
            u: RealField::zeros(grid, d),
            theta: RealField::zeros(grid, 1),
            e: RealField::zeros(grid, d),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.grid().dim();
        for (f, c) in [(&self.rho, 1), (&self.u, d), (&self.theta, 1), (&self.e, d)] {
            if f.grid() != self.grid() {
                return Err(Error::GridMismatch);
            }
            if f.components() != c {
                return Err(Error::ComponentMismatch { expected: c, found: f.components() });
            }
            f.ensure_finite()?;
        }
        Ok(())
    }

    pub fn map_fields(&self, f: impl Fn(&RealField) -> RealField) -> EPState {
        EPState { rho: f(&self.rho), u: f(&self.u), theta: f(&self.theta), e: f(&self.e), time: self.time }
    }

    pub fn try_map_fields(&self, f: impl Fn(&RealField) -> Result<RealField>) -> Result<EPState> {
        Ok(EPState { rho: f(&self.rho)?, u: f(&self.u)?, theta: f(&self.theta)?, e: f(&self.e)?, time: self.time })
    }

    /// `self − other`, field by field.
    pub fn difference(&self, other: &EPState) -> EPState {
        let sub = |a: &RealField, b: &RealField| a - b;
        EPState {
            rho: sub(&self.rho, &other.rho),
            u: sub(&self.u, &other.u),
            theta: sub(&self.theta, &other.theta),
            e: sub(&self.e, &other.e),
            time: self.time,
        }
    }

    pub fn max_abs(&self) -> f64 {
        [&self.rho, &self.u, &self.theta, &self.e].iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.u.is_finite() && self.theta.is_finite() && self.e.is_finite()
    }
}

impl Interpolate for EPState {
    fn weighted_sum(terms: &[(f64, &Self)]) -> Self {
        let pick = |f: fn(&EPState) -> &RealField| {
            let parts: Vec<(f64, &RealField)> = terms.iter().map(|(w, s)| (*w, f(s))).collect();
            RealField::weighted_sum(&parts)
        };
        EPState {
            rho: pick(|s| &s.rho),
            u: pick(|s| &s.u),
            theta: pick(|s| &s.theta),
            e: pick(|s| &s.e),
            time: terms.iter().map(|(w, s)| w * s.time).sum(),
        }
    }
}

impl Snapshot for EPState {
    fn field_names() -> Vec<&'static str> {
        vec!["rho", "u", "theta", "E"]
    }

    fn fields(&self) -> Vec<&RealField> {
        vec![&self.rho, &self.u, &self.theta, &self.e]
    }

    fn from_fields(fields: Vec<RealField>) -> Result<Self> {
        let [rho, u, theta, e]: [RealField; 4] =
            fields.try_into().map_err(|_| Error::InvalidInput("a state needs four fields".into()))?;
        let s = EPState { rho, u, theta, e, time: 0.0 };
        s.validate()?;
        Ok(s)
    }
}

/// Physical variables `(n, u, 𝒯, Φ, E)`.
#[derive(Clone, Debug)]
pub struct PhysicalFields {
    pub n: RealField,
    pub u: RealField,
    pub temperature: RealField,
    pub phi: RealField,
    pub e: RealField,
}

/// `Δ⁻¹` with zero mean.
pub fn inverse_laplacian(f: &RealField) -> Result<RealField> {
    let s = apply_multiplier(&forward(f), |k| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        Complex64::new(if k2 == 0.0 { 0.0 } else { -1.0 / k2 }, 0.0)
    })?;
    Ok(inverse(&s))
}

pub fn to_transformed(n: &RealField, u: &RealField, temperature: &RealField, params: &PhysicalParams) -> Result<EPState> {
    params.validate()?;
    let count = n.data().iter().filter(|v| !(**v > 0.0)).count();
    if count > 0 {
        return Err(Error::Vacuum { count });
    }
    let n_bar = params.n_bar;
    let rho = n.map(|v| (v / n_bar).ln());
    let theta = temperature.map(|v| v - params.t_l);
    let (e, _) = inverse_laplacian_gradient(&n.map(|v| v - n_bar))?;
    let s = EPState { rho, u: u.clone(), theta, e, time: 0.0 };
    s.validate()?;
    Ok(s)
}

pub fn from_transformed(state: &EPState, params: &PhysicalParams) -> Result<PhysicalFields> {
    let n = state.rho.map(|r| params.n_bar * r.exp());
    let phi = inverse_laplacian(&n.map(|v| v - params.n_bar))?;
    Ok(PhysicalFields {
        n,
        u: state.u.clone(),
        temperature: state.theta.map(|v| v + params.t_l),
        phi,
        e: state.e.clone(),
    })
}

/// Initial data of iterate `m + 1`: every field replaced by `S_{m+1}` of it.
pub fn mollify_initial(data0: &EPState, m: usize, partition: &DyadicPartition) -> Result<EPState> {
    let q = (m + 1).min(partition.q_max() as usize + 1) as i32;
    let mut s = data0.try_map_fields(|f| s_q(f, q, partition))?;
    s.time = data0.time;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::ensemble::{random_field, FieldSpec};
    use crate::lp::build_partition;
    use crate::spectral::{dealias, gradient};

    fn grid() -> Grid {
        Grid::new(2, 32, 2.0 * PI).unwrap()
    }

    #[test]
    fn equilibrium_maps_to_zero() {
        let g = grid();
        let p = PhysicalParams::for_horizon(0.1);
        let s = to_transformed(&RealField::constant(g, p.n_bar), &RealField::zeros(g, 2), &RealField::constant(g, p.t_l), &p)
            .unwrap();
        assert_eq!(s.max_abs(), 0.0);
        let n = RealField::constant(g, p.n_bar * 1f64.exp());
        let s = to_transformed(&n, &RealField::zeros(g, 2), &RealField::constant(g, 1.0), &p).unwrap();
        assert!(s.rho.data().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn round_trip_and_vacuum() {
        let g = grid();
        let p = PhysicalParams::for_horizon(0.1);
        let pert = random_field(&g, &FieldSpec::scalar(-2.0, 8.0), 1);
        let n = pert.map(|v| 1.0 + 0.3 * v / (1.0 + v.abs()));
        let u = random_field(&g, &FieldSpec::vector(2, -2.0, 8.0), 2);
        let t = random_field(&g, &FieldSpec::scalar(-3.0, 8.0), 3).map(|v| 1.0 + 0.1 * v);
        let s = to_transformed(&n, &u, &t, &p).unwrap();
        let back = from_transformed(&s, &p).unwrap();
        assert!(back.n.max_abs_diff(&n) < 1e-12 * n.max_abs());
        assert!(back.temperature.max_abs_diff(&t) < 1e-12 * t.max_abs());
        assert_eq!(back.u.max_abs_diff(&u), 0.0);
        // ΔΦ = n − n̄ and ∇Φ = E.
        let lap = crate::spectral::laplacian(&back.phi);
        let mut src = n.map(|v| v - p.n_bar);
        let mean = src.mean(0);
        src.data_mut().iter_mut().for_each(|v| *v -= mean);
        assert!(lap.max_abs_diff(&src) < 1e-12);
        assert!(gradient(&back.phi).unwrap().max_abs_diff(&s.e) < 1e-12);
        let mut bad = n.clone();
        bad.data_mut()[5] = 0.0;
        bad.data_mut()[9] = -1.0;
        assert!(matches!(to_transformed(&bad, &u, &t, &p), Err(Error::Vacuum { count: 2 })));
    }

    #[test]
    fn mollification_levels() {
        let g = grid();
        let part = build_partition(g).unwrap();
        let f = dealias(&random_field(&g, &FieldSpec::scalar(-1.0, 10.0), 4));
        let state = EPState {
            rho: f.clone(),
            u: RealField::stack(&[f.clone(), f.scaled(2.0)]).unwrap(),
            theta: f.clone(),
            e: RealField::zeros(g, 2),
            time: 0.0,
        };
        let full = mollify_initial(&state, part.q_max() as usize + 1, &part).unwrap();
        assert!(full.rho.max_abs_diff(&f) < 1e-13);
        let m0 = mollify_initial(&state, 0, &part).unwrap();
        let expected = s_q(&f, 1, &part).unwrap();
        assert_eq!(m0.theta.max_abs_diff(&expected), 0.0);
    }

    #[test]
    fn params_validation() {
        let p = PhysicalParams::for_horizon(0.1);
        assert!((p.kappa_tilde() - 11.0).abs() < 1e-12);
        assert!(p.validate().is_ok());
        assert!(PhysicalParams { gamma: 1.0, ..p }.validate().is_err());
        assert!(PhysicalParams { tau_p: 2.0, ..p }.validate().is_err());
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"T_L\""));
        assert!(serde_json::from_str::<PhysicalParams>(r#"{"gamma":1.5,"kappa":1,"n_bar":1,"T_L":1,"bogus":0}"#).is_err());
    }
}
