//! Linear sub-solvers: transport (scalar, vector and the coupled acoustic
//! system), heat with an exponential integrator, and the nonlocal
//! `E`-evolution.

mod efield;
mod heat;
mod store;
mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Interpolation, TimeSeries};
use crate::spectral::RealField;

pub use efield::solve_e_evolution;
pub use heat::{heat_estimate_witness, phi_functions, solve_heat, HeatWitness};
pub use store::{read_series, write_series, SeriesIndex, Snapshot};
pub use transport::{max_speed, solve_acoustic, solve_transport, AcousticSystem};

/// Default `dt·max|v|·k_max` bound.
pub const DEFAULT_CFL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4Explicit,
    ExponentialRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStepper {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub interpolation: Interpolation,
}

fn default_stride() -> usize {
    1
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

impl TimeStepper {
    pub fn new(dt: f64, scheme: Scheme, t_end: f64, snapshot_stride: usize) -> Result<Self> {
        let ts = TimeStepper {
            dt,
            scheme,
            t_end,
            snapshot_stride,
            cfl_safety: DEFAULT_CFL,
            interpolation: Interpolation::default(),
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("need dt > 0 and t_end > 0, got dt = {}, t_end = {}", self.dt, self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        if !(self.cfl_safety > 0.0) {
            return Err(Error::Config(format!("cfl_safety must be positive, got {}", self.cfl_safety)));
        }
        Ok(())
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Same stepper with `dt` and stride scaled for refinement studies.
    pub fn refined(mut self, factor: usize) -> Self {
        self.dt /= factor as f64;
        self.snapshot_stride *= factor;
        self
    }

    /// Number of steps; `dt` is shrunk when `t_end` is not a multiple of it.
    pub fn steps(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest.max(1.0) as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Step actually taken.
    pub fn step_size(&self) -> f64 {
        self.t_end / self.steps() as f64
    }

    /// Step indices at which snapshots are stored, always including both ends.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let n = self.steps();
        let mut out: Vec<usize> = (0..=n).step_by(self.snapshot_stride).collect();
        if *out.last().unwrap() != n {
            out.push(n);
        }
        out
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let h = self.step_size();
        self.snapshot_steps().into_iter().map(|k| k as f64 * h).collect()
    }

    fn require(&self, scheme: Scheme) -> Result<()> {
        self.validate()?;
        if self.scheme != scheme {
            return Err(Error::Config(format!("solver needs scheme {scheme:?}, stepper has {:?}", self.scheme)));
        }
        Ok(())
    }
}

/// A time-dependent coefficient or source sampled at stage times.
#[derive(Clone, Copy)]
pub enum Drive<'a> {
    Zero,
    Constant(&'a RealField),
    Series(&'a TimeSeries<RealField>, Interpolation),
    Function(&'a (dyn Fn(f64) -> RealField + Sync)),
}

impl<'a> Drive<'a> {
    pub fn at(&self, t: f64) -> Option<RealField> {
        match self {
            Drive::Zero => None,
            Drive::Constant(f) => Some((*f).clone()),
            Drive::Series(s, mode) => Some(s.sample(t, *mode)),
            Drive::Function(f) => Some(f(t)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Drive::Zero)
    }
}

/// Collects snapshots at the stepper's snapshot steps.
struct Recorder<T> {
    wanted: Vec<usize>,
    next: usize,
    times: Vec<f64>,
    snaps: Vec<T>,
}

impl<T> Recorder<T> {
    fn new(ts: &TimeStepper) -> Self {
        let wanted = ts.snapshot_steps();
        Recorder { next: 0, times: Vec::with_capacity(wanted.len()), snaps: Vec::with_capacity(wanted.len()), wanted }
    }

    fn wants(&self, step: usize) -> bool {
        self.next < self.wanted.len() && self.wanted[self.next] == step
    }

    fn push(&mut self, t: f64, snap: T) {
        self.times.push(t);
        self.snaps.push(snap);
        self.next += 1;
    }

    fn finish(self) -> Result<TimeSeries<T>> {
        TimeSeries::new(self.times, self.snaps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_counts() {
        let ts = TimeStepper::new(0.1, Scheme::Rk4Explicit, 1.0, 3).unwrap();
        assert_eq!(ts.steps(), 10);
        assert_eq!(ts.snapshot_steps(), vec![0, 3, 6, 9, 10]);
        let odd = TimeStepper::new(0.3, Scheme::Rk4Explicit, 1.0, 1).unwrap();
        assert_eq!(odd.steps(), 4);
        assert!((odd.step_size() - 0.25).abs() < 1e-15);
        assert!(TimeStepper::new(0.0, Scheme::Rk4Explicit, 1.0, 1).is_err());
        assert!(TimeStepper::new(0.1, Scheme::Rk4Explicit, 1.0, 0).is_err());
        let r = ts.refined(2);
        assert_eq!(r.steps(), 20);
        let (a, b) = (r.snapshot_times(), ts.snapshot_times());
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }
}
