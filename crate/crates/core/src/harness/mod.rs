//! Experiment configuration, initial data, runs, reports and the acceptance
//! suite.

pub mod acceptance;
pub mod config;
pub mod data;
pub mod experiments;
pub mod report;

pub use acceptance::{Acceptance, CriterionOutcome, CRITERIA};
pub use config::{CheckConfig, EnsembleConfig, Experiment, RunConfig, SweepConfig, Tolerances, UniquenessConfig};
pub use data::{generate_initial_data, periodic_bump, random_direction, DataFamily, GeneratedData, InitialDataFamily};
pub use experiments::{
    contraction_ratio, convergence_study, inequality_suite, kappa_sweep, run_experiment, ConvergenceStudy,
    InequalitySuite, KappaSweep, RunManifest, RunOutcome,
};
pub use report::{report_summary, Summary, SummaryRow};
