use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ep::{IterationOptions, PhysicalParams};
use crate::error::{Error, Result};
use crate::solvers::TimeStepper;
use crate::spectral::Grid;

use super::data::InitialDataFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Inequalities,
    ConvergenceStudy,
    KappaSweep,
    Uniqueness,
}

/// Named tolerances; every threshold a report compares against lives here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bony_reconstruction: f64,
    pub orthogonality: f64,
    pub product_support: f64,
    pub lp_reconstruction: f64,
    pub partition_sum: f64,
    pub heat_eigenmode: f64,
    /// Smallest accepted error ratio under `dt` halving for the forced heat problem.
    pub heat_order_ratio: f64,
    pub refinement_change: f64,
    pub translation: f64,
    pub mean_conservation: f64,
    pub contraction_ratio: f64,
    pub uniform_bound_factor: f64,
    pub pde_residual: f64,
    pub residual_refinement_factor: f64,
    pub manufactured_residual: f64,
    pub poisson_residual: f64,
    pub poisson_initial: f64,
    pub mass_drift: f64,
    pub uniqueness_ratio_min: f64,
    pub uniqueness_ratio_max: f64,
    /// Upper bound on `2^m ‖S_{m+1}f − f‖_{B^{σ−1}} / ‖f‖_{B^σ}`.
    pub mollification_constant: f64,
    /// Relative slack allowed when checking that contraction ratios do not grow with `κ̃`.
    pub kappa_monotone_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            bony_reconstruction: 1e-12,
            orthogonality: 1e-12,
            product_support: 1e-12,
            lp_reconstruction: 1e-12,
            partition_sum: 1e-12,
            heat_eigenmode: 1e-12,
            heat_order_ratio: 7.2,
            refinement_change: 0.25,
            translation: 1e-8,
            mean_conservation: 1e-10,
            contraction_ratio: 0.5,
            uniform_bound_factor: 3.0,
            pde_residual: 1e-5,
            residual_refinement_factor: 4.0,
            manufactured_residual: 1e-8,
            poisson_residual: 1e-6,
            poisson_initial: 1e-12,
            mass_drift: 1e-8,
            uniqueness_ratio_min: 7.0,
            uniqueness_ratio_max: 13.0,
            mollification_constant: 1.0,
            kappa_monotone_slack: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub size: usize,
    /// Band radius in mode units; `None` uses 90% of the dealiasing radius.
    pub band: Option<f64>,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { size: 50, band: None, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Number of `dt`/snapshot-stride halvings in a convergence study.
    pub refinements: usize,
    /// Multiples of the configured `κ̃` in a κ̃ sweep.
    pub kappa_factors: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { refinements: 1, kappa_factors: vec![1.0, 4.0, 16.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessConfig {
    pub sizes: Vec<f64>,
    /// Seed of the random perturbation direction.
    pub direction_seed: u64,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        UniquenessConfig { sizes: vec![1e-3, 1e-4], direction_seed: 17 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Criterion ids to run; empty runs all of them.
    pub criteria: Vec<u8>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Grid,
    /// Defaults to `γ = 5/3`, `n̄ = 1`, `T_L = 1`, `κ̃ = (1 + T)/T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PhysicalParams>,
    pub stepper: TimeStepper,
    pub data: InitialDataFamily,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub iteration: IterationOptions,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub uniqueness: UniquenessConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default = "default_true")]
    pub write_snapshots: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Physical parameters with defaults filled in.
    pub fn physical_params(&self) -> PhysicalParams {
        self.params.unwrap_or_else(|| PhysicalParams::for_horizon(self.stepper.t_end))
    }

    pub fn validate(&self) -> Result<()> {
        self.physical_params().validate()?;
        self.stepper.validate()?;
        self.data.validate()?;
        if self.iteration.max_m == 0 || self.iteration.retain == 0 || !(self.iteration.tol > 0.0) {
            return Err(Error::Config("iteration needs max_m >= 1, retain >= 1 and tol > 0".into()));
        }
        if self.ensemble.size == 0 {
            return Err(Error::Config("ensemble size must be positive".into()));
        }
        if let Some(b) = self.ensemble.band {
            if !(b >= 1.0 && b <= self.grid.dealias_radius()) {
                return Err(Error::Config(format!("ensemble band {b} outside [1, {:.2}]", self.grid.dealias_radius())));
            }
        }
        if self.sweep.kappa_factors.is_empty() || self.sweep.kappa_factors.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config("kappa_factors must be nonempty and positive".into()));
        }
        if self.uniqueness.sizes.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("perturbation sizes must be finite and nonnegative".into()));
        }
        if let Some(id) = self.check.criteria.iter().find(|&&c| !(1..=14).contains(&c)) {
            return Err(Error::Config(format!("no acceptance criterion {id}")));
        }
        Ok(())
    }

    pub fn ensemble_band(&self) -> f64 {
        self.ensemble.band.unwrap_or(0.9 * self.grid.dealias_radius())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"dim": 2, "points_per_axis": 32, "box_length": 6.283185307179586},
        "stepper": {"dt": 0.005, "scheme": "rk4_explicit", "t_end": 0.1},
        "data": {"name": "gaussian_bump", "amplitude": 0.01},
        "experiment": "simulate"
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, Experiment::Simulate);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.stepper.snapshot_stride, 1);
        assert!(cfg.write_snapshots);
        let p = cfg.physical_params();
        assert!((p.kappa_tilde() - 11.0).abs() < 1e-12);
    }

    #[test]
    fn schema_errors_are_config_errors() {
        let unknown = MINIMAL.replace("\"experiment\"", "\"bogus\": 1, \"experiment\"");
        assert!(matches!(RunConfig::from_json(&unknown), Err(Error::Config(_))));
        let bad_dt = MINIMAL.replace("0.005", "-1.0");
        assert!(matches!(RunConfig::from_json(&bad_dt), Err(Error::Config(_))));
        let bad_criterion = MINIMAL.replace("\"experiment\"", "\"check\": {\"criteria\": [15]}, \"experiment\"");
        assert!(matches!(RunConfig::from_json(&bad_criterion), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json("{"), Err(Error::Config(_))));
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
