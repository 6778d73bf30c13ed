//! Numerical laboratory for the periodic Euler–Poisson system with heat
//! conduction: spectral operators, Littlewood–Paley blocks, Besov norms,
//! paradifferential estimates, linear solvers and the Picard iteration.

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod bony;
pub mod ensemble;
pub mod ep;
pub mod error;
pub mod harness;
pub mod lp;
pub mod par;
pub mod series;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
