use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use super::config::{Experiment, RunConfig};
use super::data::{generate_initial_data, random_direction};
use super::report::{report_summary, Summary};
use crate::besov::{critical_index, BesovParams};
use crate::bony::{
    bernstein_check, commutator_check, compose_h1, composition_check, moser_check_classical, moser_check_generalized,
    CommutatorCase, CommutatorOperator, HolderExponents, InequalityReport,
};
use crate::ensemble::ensemble_member;
use crate::ep::{
    check_poisson_constraint, mass_drift, physical_residuals, residual_check, run_iteration, run_with_retry,
    uniqueness_experiment, EPState, IterationTrace, PhysicalParams, UniquenessReport,
};
use crate::error::{Error, Result};
use crate::lp::{build_partition, DyadicPartition};
use crate::par;
use crate::series::TimeSeries;
use crate::solvers::{write_series, TimeStepper};
use crate::spectral::{dealias, laplacian, Grid, RealField};

/// Everything a run leaves behind, apart from the files themselves.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub experiment: Experiment,
    pub config: RunConfig,
    pub params: PhysicalParams,
    pub sigma: f64,
    pub q_range: [i32; 2],
    pub data_warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    pub results: Value,
    pub files: Vec<String>,
}

impl RunManifest {
    /// Manifest JSON with the timestamp removed, for reproducibility checks.
    pub fn without_timestamp(&self) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("created_unix");
        }
        Ok(v)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// Some Picard run failed to converge.
    pub diverged: bool,
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Output<'_> {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &serde_json::to_string_pretty(value)?)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::file(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn bytes(&mut self, name: &str, body: Vec<u8>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::file(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Largest `δ_{m+1}/δ_m` over `m >= 2`, the measured contraction ratio.
pub fn contraction_ratio(trace: &IterationTrace) -> Option<f64> {
    trace.ratios().iter().filter(|(m, _)| *m >= 2).map(|r| r.1).reduce(f64::max)
}

/// The five ensemble reports of the inequality experiment.
#[derive(Clone, Debug, Serialize)]
pub struct InequalitySuite {
    pub bernstein: InequalityReport,
    pub moser_classical: InequalityReport,
    pub moser_generalized: Vec<InequalityReport>,
    pub commutator: Vec<InequalityReport>,
    pub composition: InequalityReport,
}

impl InequalitySuite {
    /// Every report in a fixed order.
    pub fn reports(&self) -> Vec<&InequalityReport> {
        let mut out = vec![&self.bernstein, &self.moser_classical];
        out.extend(&self.moser_generalized);
        out.extend(&self.commutator);
        out.push(&self.composition);
        out
    }
}

fn member(grid: &Grid, components: usize, band: f64, seed: u64, i: usize) -> RealField {
    dealias(&ensemble_member(grid, components, band, seed, i))
}

/// Random pairs `(f, g)` of scalar fields.
pub fn scalar_pairs(grid: &Grid, band: f64, seed: u64, size: usize) -> Vec<(RealField, RealField)> {
    par::map_range(size, |i| (member(grid, 1, band, seed, 2 * i), member(grid, 1, band, seed, 2 * i + 1)))
}

/// Pairs `(h₁(ρ), Δθ)` entering the heat-conduction product estimate.
pub fn heat_product_pairs(
    grid: &Grid,
    band: f64,
    seed: u64,
    size: usize,
    params: &PhysicalParams,
) -> Result<Vec<(RealField, RealField)>> {
    par::map_range(size, |i| {
        let rho = member(grid, 1, band, seed ^ 0xE35, 2 * i);
        let rho = rho.scaled(0.5 / rho.max_abs().max(f64::MIN_POSITIVE));
        let theta = member(grid, 1, band, seed ^ 0xE35, 2 * i + 1);
        Ok((compose_h1(&rho, params.gamma, params.kappa, params.n_bar)?, laplacian(&theta)))
    })
    .into_iter()
    .collect()
}

/// Runs the Bernstein, classical and generalized Moser, commutator and
/// composition ensembles on one grid. The `(h₁(ρ), Δθ)` case at
/// `s = σ − 2` is included when `σ − 2 > 0`, i.e. in three dimensions.
pub fn inequality_suite(
    grid: Grid,
    size: usize,
    band: f64,
    seed: u64,
    params: &PhysicalParams,
) -> Result<InequalitySuite> {
    let part = build_partition(grid)?;
    let sigma = critical_index(grid.dim());
    let pairs = scalar_pairs(&grid, band, seed, size);
    let singles: Vec<RealField> = pairs.iter().map(|p| p.0.clone()).collect();
    let at_sigma = BesovParams::l2_sum(sigma);
    let inf = f64::INFINITY;
    let mut generalized = Vec::new();
    for (p1, p2, p3, p4) in [(inf, 2.0, 2.0, inf), (2.0, inf, inf, 2.0)] {
        let ex = HolderExponents { p1, p2, p3, p4 };
        let mut rep = moser_check_generalized(&pairs, &at_sigma, &ex, &part)?;
        rep.name = format!("{}_{}", rep.name, exponent_label(&ex));
        generalized.push(rep);
    }
    if sigma - 2.0 > 0.0 {
        let ex = HolderExponents { p1: inf, p2: 2.0, p3: 2.0, p4: inf };
        let heat = heat_product_pairs(&grid, band, seed, size, params)?;
        let mut rep = moser_check_generalized(&heat, &BesovParams::l2_sum(sigma - 2.0), &ex, &part)?;
        rep.name = "moser_generalized_heat_conduction".into();
        generalized.push(rep);
    }
    let commutator = CommutatorCase::ALL
        .iter()
        .map(|&case| commutator_check(&pairs, CommutatorOperator::Grad, case, &part))
        .collect::<Result<Vec<_>>>()?;
    let rhos: Vec<RealField> = singles
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let amp = 0.1 + 1.9 * i as f64 / (size.max(2) - 1) as f64;
            f.scaled(amp / f.max_abs().max(f64::MIN_POSITIVE))
        })
        .collect();
    Ok(InequalitySuite {
        bernstein: bernstein_check(&singles, &part)?,
        moser_classical: moser_check_classical(&pairs, &at_sigma, &part)?,
        moser_generalized: generalized,
        commutator,
        composition: composition_check(&rhos, params.n_bar, &at_sigma, &part)?,
    })
}

fn exponent_label(ex: &HolderExponents) -> String {
    let l = |x: f64| if x.is_infinite() { "inf".to_string() } else { format!("{x}") };
    format!("{}_{}_{}_{}", l(ex.p1), l(ex.p2), l(ex.p3), l(ex.p4))
}

struct Prepared {
    grid: Grid,
    part: DyadicPartition,
    params: PhysicalParams,
    data: EPState,
    warnings: Vec<String>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let params = cfg.physical_params();
    let generated = generate_initial_data(&cfg.data, cfg.grid, &params)?;
    Ok(Prepared {
        grid: cfg.grid,
        part: build_partition(cfg.grid)?,
        params,
        data: generated.state,
        warnings: generated.warnings,
    })
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

fn final_series(trace: &IterationTrace) -> Option<&TimeSeries<EPState>> {
    if trace.converged() {
        trace.last()
    } else {
        None
    }
}

#[derive(Serialize)]
struct SimulateResults {
    t_end: f64,
    poisson_residuals: Vec<f64>,
    mass_drift: Option<f64>,
}

fn simulate(cfg: &RunConfig, pre: &Prepared, out: &mut Output) -> Result<(Value, Option<Summary>, bool)> {
    let trace = run_with_retry(&pre.data, &pre.params, &cfg.stepper, &pre.part, &cfg.iteration, None)?;
    let summary = report_summary(&trace);
    out.text("summary.txt", &summary.to_table())?;
    let mut csv = Vec::new();
    summary.write_csv(&mut csv)?;
    out.bytes("per_m.csv", csv)?;
    let mut results = SimulateResults { t_end: trace.t_end, poisson_residuals: Vec::new(), mass_drift: None };
    if let Some(series) = final_series(&trace) {
        results.poisson_residuals = check_poisson_constraint(series, &pre.params)?;
        results.mass_drift = Some(mass_drift(series, &pre.params));
        if cfg.write_snapshots {
            write_series(out.dir.join("snapshots"), series)?;
            out.files.push("snapshots/index.json".into());
        }
    }
    Ok((serde_json::to_value(results)?, Some(summary), !trace.converged()))
}

fn inequalities(cfg: &RunConfig, pre: &Prepared, out: &mut Output) -> Result<Value> {
    let suite = inequality_suite(pre.grid, cfg.ensemble.size, cfg.ensemble_band(), cfg.ensemble.seed, &pre.params)?;
    out.json("bernstein.json", &suite.bernstein)?;
    out.json("moser_classical.json", &suite.moser_classical)?;
    out.json("moser_generalized.json", &suite.moser_generalized)?;
    out.json("commutator.json", &suite.commutator)?;
    out.json("composition.json", &suite.composition)?;
    let sups: serde_json::Map<String, Value> =
        suite.reports().iter().map(|r| (r.name.clone(), Value::from(r.sup_ratio))).collect();
    Ok(Value::Object(sups))
}

/// One level of a `dt` refinement study.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementLevel {
    pub dt: f64,
    pub verdict: String,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub physical_residuals: Vec<f64>,
    pub poisson_max: f64,
    pub mass_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStudy {
    pub equations: Vec<String>,
    pub levels: Vec<RefinementLevel>,
    /// Per equation, residual at one level over residual at the next.
    pub reduction: Vec<Vec<f64>>,
}

/// Converged runs at `dt, dt/2, …`; snapshots are kept at every step so the
/// snapshot spacing is refined together with `dt`.
pub fn convergence_study(
    data: &EPState,
    params: &PhysicalParams,
    ts: &TimeStepper,
    part: &DyadicPartition,
    opts: &crate::ep::IterationOptions,
    refinements: usize,
) -> Result<ConvergenceStudy> {
    let mut levels = Vec::new();
    let mut equations = Vec::new();
    for k in 0..=refinements {
        let stepper = TimeStepper { dt: ts.dt / 2f64.powi(k as i32), ..*ts };
        let trace = run_iteration(data, params, &stepper, part, &crate::ep::IterationOptions { retain: 1, ..*opts }, None)?;
        let summary = report_summary(&trace);
        let Some(series) = final_series(&trace) else {
            return Err(Error::Divergence {
                m: trace.iterations(),
                reason: format!("refinement level {k}: {}", trace.failure.unwrap_or_default()),
            });
        };
        let res = residual_check(series, params, None)?;
        equations = res.equations.clone();
        levels.push(RefinementLevel {
            dt: stepper.dt,
            verdict: summary.verdict_label().into(),
            iterations: trace.iterations(),
            residuals: res.max_per_equation(),
            physical_residuals: physical_residuals(series, params)?.max_per_equation(),
            poisson_max: max_of(&check_poisson_constraint(series, params)?),
            mass_drift: mass_drift(series, params),
        });
    }
    let reduction = levels
        .windows(2)
        .map(|w| w[0].residuals.iter().zip(&w[1].residuals).map(|(a, b)| if *b > 0.0 { a / b } else { f64::INFINITY }).collect())
        .collect();
    Ok(ConvergenceStudy { equations, levels, reduction })
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaPoint {
    pub factor: f64,
    pub kappa_tilde: f64,
    pub verdict: String,
    pub iterations: usize,
    pub contraction_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaSweep {
    pub points: Vec<KappaPoint>,
    /// Contraction ratios never increase along the sweep (within the slack).
    pub monotone: bool,
    pub slack: f64,
}

pub fn kappa_sweep(
    data: &EPState,
    params: &PhysicalParams,
    ts: &TimeStepper,
    part: &DyadicPartition,
    opts: &crate::ep::IterationOptions,
    factors: &[f64],
    slack: f64,
) -> Result<KappaSweep> {
    let base = params.kappa_tilde();
    let mut points = Vec::new();
    for &factor in factors {
        let p = params.with_kappa_tilde(base * factor);
        let trace = run_iteration(data, &p, ts, part, &crate::ep::IterationOptions { retain: 1, ..*opts }, None)?;
        points.push(KappaPoint {
            factor,
            kappa_tilde: p.kappa_tilde(),
            verdict: report_summary(&trace).verdict_label().into(),
            iterations: trace.iterations(),
            contraction_ratio: contraction_ratio(&trace),
        });
    }
    let ratios: Vec<f64> = points.iter().map(|p| p.contraction_ratio.unwrap_or(f64::INFINITY)).collect();
    let monotone = points.iter().all(|p| p.verdict == "contraction")
        && ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack));
    Ok(KappaSweep { points, monotone, slack })
}

fn sweep_outputs<T: Serialize>(out: &mut Output, name: &str, value: &T) -> Result<Value> {
    out.json(name, value)?;
    Ok(serde_json::to_value(value)?)
}

/// Executes the configured experiment, writing every artifact plus
/// `manifest.json` into `out_dir`.
pub fn run_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let pre = prepare(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let mut out = Output { dir: out_dir, files: Vec::new() };
    let mut summary = None;
    let mut diverged = false;
    let opts = &cfg.iteration;
    let ts = &cfg.stepper;
    let results = match cfg.experiment {
        Experiment::Simulate => {
            let (v, s, d) = simulate(cfg, &pre, &mut out)?;
            summary = s;
            diverged = d;
            v
        }
        Experiment::Inequalities => inequalities(cfg, &pre, &mut out)?,
        Experiment::ConvergenceStudy => {
            match convergence_study(&pre.data, &pre.params, ts, &pre.part, opts, cfg.sweep.refinements) {
                Ok(study) => sweep_outputs(&mut out, "convergence.json", &study)?,
                Err(Error::Divergence { m, reason }) => {
                    diverged = true;
                    serde_json::json!({ "divergence": { "m": m, "reason": reason } })
                }
                Err(e) => return Err(e),
            }
        }
        Experiment::KappaSweep => {
            let sweep = kappa_sweep(
                &pre.data,
                &pre.params,
                ts,
                &pre.part,
                opts,
                &cfg.sweep.kappa_factors,
                cfg.tolerances.kappa_monotone_slack,
            )?;
            diverged = sweep.points.iter().any(|p| p.verdict != "contraction");
            sweep_outputs(&mut out, "kappa_sweep.json", &sweep)?
        }
        Experiment::Uniqueness => {
            let dir = random_direction(pre.grid, cfg.uniqueness.direction_seed);
            match uniqueness_experiment(&pre.data, &dir, &cfg.uniqueness.sizes, &pre.params, ts, &pre.part, opts) {
                Ok(rep) => sweep_outputs::<UniquenessReport>(&mut out, "uniqueness.json", &rep)?,
                Err(Error::Divergence { m, reason }) => {
                    diverged = true;
                    serde_json::json!({ "divergence": { "m": m, "reason": reason } })
                }
                Err(e) => return Err(e),
            }
        }
    };
    let mut files = out.files;
    files.push("manifest.json".into());
    let manifest = RunManifest {
        tool: "eplab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        experiment: cfg.experiment,
        config: cfg.clone(),
        params: pre.params,
        sigma: critical_index(pre.grid.dim()),
        q_range: [-1, pre.part.q_max()],
        data_warnings: pre.warnings,
        summary,
        results,
        files,
    };
    let path = out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::file(&path, e))?;
    Ok(RunOutcome { manifest, diverged })
}
