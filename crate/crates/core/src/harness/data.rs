use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensemble::{random_field, FieldSpec};
use crate::ep::{poisson_field, EPState, PhysicalParams};
use crate::error::{Error, Result};
use crate::spectral::{dealias, Grid, RealField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFamily {
    /// Periodic bump in density and a wider one in temperature, fluid at rest.
    GaussianBump,
    /// Right-moving linear sound wave along the first axis.
    AcousticTone,
    /// Seeded band-limited random density, velocity and temperature.
    RandomBandlimited,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataFamily {
    pub name: DataFamily,
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    /// Bump width as a fraction of the box length.
    #[serde(default = "default_width")]
    pub width: f64,
    /// Mode number of the acoustic tone.
    #[serde(default = "default_mode")]
    pub mode: u32,
    /// Band radius in mode units for random data.
    #[serde(default = "default_band")]
    pub band: f64,
}

fn default_width() -> f64 {
    0.15
}

fn default_mode() -> u32 {
    1
}

fn default_band() -> f64 {
    4.0
}

impl InitialDataFamily {
    pub fn new(name: DataFamily, amplitude: f64, seed: u64) -> Self {
        InitialDataFamily { name, amplitude, seed, width: default_width(), mode: default_mode(), band: default_band() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(Error::Config(format!("amplitude must be finite and nonnegative, got {}", self.amplitude)));
        }
        if !(self.width > 0.0 && self.width <= 0.5) {
            return Err(Error::Config(format!("width must lie in (0, 0.5], got {}", self.width)));
        }
        if self.mode == 0 || !(self.band >= 1.0) {
            return Err(Error::Config("mode and band must be at least 1".into()));
        }
        Ok(())
    }
}

/// Data together with the adjustments made while generating it.
#[derive(Clone, Debug)]
pub struct GeneratedData {
    pub state: EPState,
    pub amplitude: f64,
    pub warnings: Vec<String>,
}

/// `exp(−d²/2w²)` with `d²` the periodic squared distance to the box centre,
/// `d² = Σ 2c²(1 − cos((x − L/2)/c))`, `c = L/2π`. Analytic on the torus.
pub fn periodic_bump(grid: Grid, width: f64) -> RealField {
    let l = grid.box_length();
    let c = l / (2.0 * PI);
    let w = width * l;
    RealField::scalar_fn(grid, |x| {
        let d2: f64 = (0..grid.dim()).map(|a| 2.0 * c * c * (1.0 - ((x[a] - 0.5 * l) / c).cos())).sum();
        (-d2 / (2.0 * w * w)).exp()
    })
}

fn unit_max(f: RealField) -> RealField {
    let m = f.max_abs();
    if m > 0.0 {
        f.scaled(1.0 / m)
    } else {
        f
    }
}

/// `(n₀, u₀, 𝒯₀)` shape profiles; the density profile is scaled by the amplitude.
fn shapes(family: &InitialDataFamily, grid: Grid, params: &PhysicalParams) -> Result<(RealField, RealField, RealField)> {
    let d = grid.dim();
    Ok(match family.name {
        DataFamily::GaussianBump => (
            periodic_bump(grid, family.width),
            RealField::zeros(grid, d),
            periodic_bump(grid, 1.5 * family.width),
        ),
        DataFamily::AcousticTone => {
            let k = family.mode as f64 * 2.0 * PI / grid.box_length();
            if family.mode as f64 > grid.dealias_radius() {
                return Err(Error::Config(format!("tone mode {} is not resolved", family.mode)));
            }
            let c = params.t_l.sqrt();
            (
                RealField::scalar_fn(grid, |x| (k * x[0]).cos()),
                RealField::vector_fn(grid, |x, a| if a == 0 { c * (k * x[0]).cos() } else { 0.0 }),
                RealField::zeros(grid, 1),
            )
        }
        DataFamily::RandomBandlimited => {
            let band = family.band.min(grid.dealias_radius());
            let s = family.seed.wrapping_mul(3);
            (
                unit_max(random_field(&grid, &FieldSpec::scalar(-2.0, band), s)),
                unit_max(random_field(&grid, &FieldSpec::vector(d, -2.0, band), s + 1)),
                // One more order of spectral decay for the temperature.
                unit_max(random_field(&grid, &FieldSpec::scalar(-3.0, band), s + 2)),
            )
        }
    })
}

/// Transformed data `(ρ₀, u₀, θ₀, E₀)` of one family. The density is
/// `n₀ = n̄(1 + a·shape)` with `a` clamped so that `min n₀ ≥ n̄/2`; all fields
/// are dealiased and `E₀ = ∇Δ⁻¹h₂(ρ₀)`.
pub fn generate_initial_data(family: &InitialDataFamily, grid: Grid, params: &PhysicalParams) -> Result<GeneratedData> {
    family.validate()?;
    params.validate()?;
    let (dens, vel, temp) = shapes(family, grid, params)?;
    let mut warnings = Vec::new();
    let lowest = dens.data().iter().fold(0.0f64, |m, &v| m.min(v));
    let mut a = family.amplitude;
    if a * lowest < -0.5 {
        let clamped = 0.5 / -lowest;
        let msg = format!("amplitude {a} would put n0 below n_bar/2; clamped to {clamped:.6}");
        log::warn!("{msg}");
        warnings.push(msg);
        a = clamped;
    }
    let rho = dealias(&dens.map(|v| (a * v).ln_1p()));
    let state = EPState {
        e: poisson_field(&rho, params)?,
        rho,
        u: dealias(&vel.scaled(a)),
        theta: dealias(&temp.scaled(a * params.t_l)),
        time: 0.0,
    };
    state.validate()?;
    Ok(GeneratedData { state, amplitude: a, warnings })
}

/// Unit-size random direction for perturbation studies; `E` is left zero.
pub fn random_direction(grid: Grid, seed: u64) -> EPState {
    let d = grid.dim();
    let band = 4.0f64.min(grid.dealias_radius());
    let s = seed.wrapping_mul(5) ^ 0xD1CE;
    EPState {
        rho: dealias(&unit_max(random_field(&grid, &FieldSpec::scalar(-2.0, band), s))),
        u: dealias(&unit_max(random_field(&grid, &FieldSpec::vector(d, -2.0, band), s + 1))),
        theta: dealias(&unit_max(random_field(&grid, &FieldSpec::scalar(-3.0, band), s + 2))),
        ..EPState::zeros(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ep::{check_poisson_constraint, from_transformed};
    use crate::series::TimeSeries;

    fn grid() -> Grid {
        Grid::new(2, 32, 2.0 * PI).unwrap()
    }

    #[test]
    fn zero_amplitude_is_equilibrium() {
        let p = PhysicalParams::for_horizon(0.1);
        for name in [DataFamily::GaussianBump, DataFamily::AcousticTone, DataFamily::RandomBandlimited] {
            let d = generate_initial_data(&InitialDataFamily::new(name, 0.0, 3), grid(), &p).unwrap();
            assert_eq!(d.state.max_abs(), 0.0);
        }
    }

    #[test]
    fn small_bump_is_positive_and_on_the_constraint() {
        let p = PhysicalParams::for_horizon(0.1);
        let d = generate_initial_data(&InitialDataFamily::new(DataFamily::GaussianBump, 0.01, 0), grid(), &p).unwrap();
        let phys = from_transformed(&d.state, &p).unwrap();
        assert!(phys.n.data().iter().all(|&v| v >= 0.99 * p.n_bar));
        assert!(check_poisson_constraint(&TimeSeries::constant(d.state), &p).unwrap()[0] < 1e-12);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn large_amplitude_is_clamped() {
        let p = PhysicalParams::for_horizon(0.1);
        let d = generate_initial_data(&InitialDataFamily::new(DataFamily::AcousticTone, 3.0, 0), grid(), &p).unwrap();
        assert!((d.amplitude - 0.5).abs() < 1e-12);
        assert_eq!(d.warnings.len(), 1);
        let phys = from_transformed(&d.state, &p).unwrap();
        assert!(phys.n.data().iter().all(|&v| v >= 0.5 * p.n_bar - 1e-2));
    }

    #[test]
    fn seeded_data_are_reproducible() {
        let p = PhysicalParams::for_horizon(0.1);
        let fam = InitialDataFamily::new(DataFamily::RandomBandlimited, 0.05, 9);
        let a = generate_initial_data(&fam, grid(), &p).unwrap().state;
        let b = generate_initial_data(&fam, grid(), &p).unwrap().state;
        assert_eq!(a.rho, b.rho);
        assert_eq!(a.u, b.u);
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.e, b.e);
    }
}
