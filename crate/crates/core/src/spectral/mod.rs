//! Periodic-box fields, FFTs and Fourier-multiplier operators.

pub mod fft;
pub mod field;
pub mod grid;
pub mod io;
pub mod operators;

pub use fft::{fft_forward, fft_inverse};
pub use field::{RealField, SpectralField};
pub use grid::{Grid, GridSpec};
pub use operators::{
    advection, apply_multiplier, curl, dealias, divergence, dot, gradient, inverse_laplacian_gradient, laplacian,
    leray_type_projection, product, NeutralityWarning,
};
