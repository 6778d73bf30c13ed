//! Time series of snapshots with interpolation in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::RealField;

/// Snapshot types that can be linearly combined.
pub trait Interpolate: Clone {
    /// `Σ wᵢ xᵢ`; `terms` is never empty.
    fn weighted_sum(terms: &[(f64, &Self)]) -> Self;
}

impl Interpolate for RealField {
    fn weighted_sum(terms: &[(f64, &Self)]) -> Self {
        let mut out = terms[0].1.scaled(terms[0].0);
        for (w, f) in &terms[1..] {
            out.axpy(*w, f);
        }
        out
    }
}

/// How a series is evaluated between snapshot times.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Piecewise linear between neighbouring snapshots.
    Linear,
    /// Four-point Lagrange on the nearest snapshots.
    #[default]
    Cubic,
}

/// Snapshots at strictly increasing times.
#[derive(Clone, Debug)]
pub struct TimeSeries<T> {
    times: Vec<f64>,
    snapshots: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new(times: Vec<f64>, snapshots: Vec<T>) -> Result<Self> {
        if times.len() != snapshots.len() {
            return Err(Error::InvalidInput(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidInput("empty time series".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("snapshot times must be finite and strictly increasing".into()));
        }
        Ok(TimeSeries { times, snapshots })
    }

    /// A single snapshot at `t = 0` (a time-constant series).
    pub fn constant(snapshot: T) -> Self {
        TimeSeries { times: vec![0.0], snapshots: vec![snapshot] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[T] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn last(&self) -> &T {
        &self.snapshots[self.snapshots.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(self.snapshots.iter())
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> TimeSeries<U> {
        TimeSeries { times: self.times.clone(), snapshots: self.snapshots.iter().map(f).collect() }
    }

    pub fn try_map<U>(&self, f: impl Fn(&T) -> Result<U>) -> Result<TimeSeries<U>> {
        let snapshots = self.snapshots.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(TimeSeries { times: self.times.clone(), snapshots })
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<T>) {
        (self.times, self.snapshots)
    }
}

impl<T: Interpolate> TimeSeries<T> {
    /// Value at time `t`, clamped to the covered interval.
    pub fn sample(&self, t: f64, mode: Interpolation) -> T {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.snapshots[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.snapshots[n - 1].clone();
        }
        // Index of the interval [times[i], times[i+1]] holding t.
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let tol = 1e-12 * (t1 - t0);
        if (t - t0).abs() <= tol {
            return self.snapshots[i].clone();
        }
        if (t1 - t).abs() <= tol {
            return self.snapshots[i + 1].clone();
        }
        if mode == Interpolation::Linear || n < 4 {
            let w = (t - t0) / (t1 - t0);
            return T::weighted_sum(&[(1.0 - w, &self.snapshots[i]), (w, &self.snapshots[i + 1])]);
        }
        let start = i.saturating_sub(1).min(n - 4);
        let nodes: Vec<usize> = (start..start + 4).collect();
        let terms: Vec<(f64, &T)> = nodes
            .iter()
            .map(|&a| {
                let w = nodes
                    .iter()
                    .filter(|&&b| b != a)
                    .map(|&b| (t - self.times[b]) / (self.times[a] - self.times[b]))
                    .product::<f64>();
                (w, &self.snapshots[a])
            })
            .collect();
        T::weighted_sum(&terms)
    }
}

/// `(∫ |g(t)|^ρ dt)^{1/ρ}` by the trapezoidal rule, or `max |g|` for `ρ = ∞`.
pub fn time_norm(times: &[f64], values: &[f64], rho: f64) -> Result<f64> {
    if rho.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    if times.len() < 2 {
        return Err(Error::Quadrature { needed: 2, got: times.len() });
    }
    let integral: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0].abs().powf(rho) + v[1].abs().powf(rho)))
        .sum();
    Ok(integral.powf(1.0 / rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn series(f: impl Fn(f64) -> f64, times: &[f64]) -> TimeSeries<RealField> {
        let g = Grid::new(1, 8, 1.0).unwrap();
        TimeSeries::new(times.to_vec(), times.iter().map(|&t| RealField::constant(g, f(t))).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_times() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let z = RealField::zeros(g, 1);
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![z.clone(), z.clone()]).is_err());
        assert!(TimeSeries::new(vec![0.0], vec![z.clone(), z]).is_err());
    }

    #[test]
    fn linear_exact_on_lines_cubic_exact_on_cubics() {
        let times: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let lin = series(|t| 2.0 * t + 1.0, &times);
        let v = lin.sample(0.23, Interpolation::Linear);
        assert!((v.data()[0] - 1.46).abs() < 1e-14);
        let cub = series(|t| t * t * t - t, &times);
        for &t in &[0.05, 0.23, 0.41, 0.49] {
            let v = cub.sample(t, Interpolation::Cubic);
            assert!((v.data()[0] - (t * t * t - t)).abs() < 1e-14, "t = {t}");
        }
        assert_eq!(cub.sample(0.2, Interpolation::Cubic).data()[0], cub.snapshots()[2].data()[0]);
        assert_eq!(cub.sample(9.0, Interpolation::Cubic).data()[0], cub.last().data()[0]);
    }

    #[test]
    fn time_norms() {
        let t = [0.0, 0.5, 1.0];
        assert!((time_norm(&t, &[2.0, 2.0, 2.0], 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(time_norm(&t, &[1.0, -3.0, 2.0], f64::INFINITY).unwrap(), 3.0);
        assert!(time_norm(&[0.0], &[1.0], 2.0).is_err());
        assert!(time_norm(&[0.0], &[1.0], f64::INFINITY).is_ok());
    }
}
