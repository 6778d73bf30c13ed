use serde::Serialize;

use super::diagnostics::poisson_field;
use super::picard::{delta_metric, run_iteration, IterationOptions, IterationTrace};
use super::{EPState, PhysicalParams};
use crate::error::{Error, Result};
use crate::lp::DyadicPartition;
use crate::series::TimeSeries;
use crate::solvers::TimeStepper;

/// Distance between converged solutions started from `data0` and from
/// `data0 + ε·direction`, one entry per `ε`.
#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub sizes: Vec<f64>,
    /// Error metric at the final time.
    pub final_errors: Vec<f64>,
    /// Error metric maximized over the snapshots.
    pub sup_errors: Vec<f64>,
    /// `sup_error / ε`.
    pub constants: Vec<f64>,
    /// `final_errors[i] / final_errors[i + 1]`.
    pub ratios: Vec<f64>,
    /// Log-log slopes between consecutive sizes.
    pub slopes: Vec<f64>,
}

fn converged(trace: IterationTrace, what: &str) -> Result<TimeSeries<EPState>> {
    if !trace.converged() {
        return Err(Error::Divergence {
            m: trace.iterations(),
            reason: format!("{what} run did not converge: {}", trace.failure.unwrap_or_default()),
        });
    }
    Ok(trace.iterates.into_iter().last().expect("a converged trace holds an iterate").1)
}

/// Perturbs `ρ`, `u` and `θ` along `direction`; `E` is recomputed from the
/// perturbed density so the data stay on the Poisson constraint.
pub fn perturbed(data0: &EPState, direction: &EPState, size: f64, params: &PhysicalParams) -> Result<EPState> {
    let mut s = data0.clone();
    s.rho.axpy(size, &direction.rho);
    s.u.axpy(size, &direction.u);
    s.theta.axpy(size, &direction.theta);
    s.e = poisson_field(&s.rho, params)?;
    Ok(s)
}

/// Runs the base problem once and one perturbed problem per size; aborts if
/// any run fails to converge.
pub fn uniqueness_experiment(
    data0: &EPState,
    direction: &EPState,
    sizes: &[f64],
    params: &PhysicalParams,
    ts: &TimeStepper,
    partition: &DyadicPartition,
    opts: &IterationOptions,
) -> Result<UniquenessReport> {
    let opts = IterationOptions { retain: 1, ..*opts };
    let base = converged(run_iteration(data0, params, ts, partition, &opts, None)?, "base")?;
    let base_last = TimeSeries::constant(base.last().clone());
    let mut report = UniquenessReport {
        sizes: sizes.to_vec(),
        final_errors: Vec::new(),
        sup_errors: Vec::new(),
        constants: Vec::new(),
        ratios: Vec::new(),
        slopes: Vec::new(),
    };
    for &eps in sizes {
        let start = perturbed(data0, direction, eps, params)?;
        let run = converged(run_iteration(&start, params, ts, partition, &opts, None)?, "perturbed")?;
        let sup = delta_metric(&run, &base, partition)?;
        let fin = delta_metric(&TimeSeries::constant(run.last().clone()), &base_last, partition)?;
        report.sup_errors.push(sup);
        report.final_errors.push(fin);
        report.constants.push(if eps > 0.0 { sup / eps } else { 0.0 });
    }
    for i in 1..sizes.len() {
        let (a, b) = (report.final_errors[i - 1], report.final_errors[i]);
        report.ratios.push(if b > 0.0 { a / b } else { f64::INFINITY });
        let ds = (sizes[i - 1] / sizes[i]).ln();
        report.slopes.push(if a > 0.0 && b > 0.0 && ds != 0.0 { (a / b).ln() / ds } else { f64::NAN });
    }
    Ok(report)
}
