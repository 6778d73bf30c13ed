//! N-dimensional FFT built from 1-D rustfft passes along each axis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{RealField, SpectralField};
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::par;

/// Relative Hermitian-symmetry defect tolerated by [`fft_inverse`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Lines handed to one task in an axis pass.
const LINES_PER_TASK: usize = 8;

type Plan = Arc<dyn Fft<f64>>;
type PlanCache = Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>;

fn plan(n: usize, inverse: bool) -> Plan {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
    let (planner, plans) = &mut *guard;
    plans
        .entry((n, inverse))
        .or_insert_with(|| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) })
        .clone()
}

/// Unnormalized in-place transform of one component.
fn transform(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.points_per_axis();
    let fft = plan(n, inverse);
    for axis in (0..grid.dim()).rev() {
        let stride = n.pow((grid.dim() - 1 - axis) as u32);
        if stride == 1 {
            par::for_each_chunk_mut(data, n * LINES_PER_TASK, |_, chunk| {
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(chunk, &mut scratch);
            });
            continue;
        }
        let block = n * stride;
        let blocks = data.len() / block;
        let groups_per_block = stride.div_ceil(LINES_PER_TASK);
        let src: &[Complex64] = data;
        let results = par::map_range(blocks * groups_per_block, |task| {
            let b = task / groups_per_block;
            let lo = (task % groups_per_block) * LINES_PER_TASK;
            let hi = (lo + LINES_PER_TASK).min(stride);
            let base = b * block;
            let mut buf = Vec::with_capacity((hi - lo) * n);
            for i in lo..hi {
                buf.extend((0..n).map(|k| src[base + k * stride + i]));
            }
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(&mut buf, &mut scratch);
            buf
        });
        for (task, buf) in results.into_iter().enumerate() {
            let b = task / groups_per_block;
            let lo = (task % groups_per_block) * LINES_PER_TASK;
            let base = b * block;
            for (l, line) in buf.chunks_exact(n).enumerate() {
                let i = lo + l;
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride + i] = *v;
                }
            }
        }
    }
}

/// Forward transform without input validation. Coefficients are scaled by
/// `1/n^N`, so the zero mode is the mean.
pub(crate) fn forward(f: &RealField) -> SpectralField {
    let grid = *f.grid();
    let scale = 1.0 / grid.len() as f64;
    let mut data: Vec<Complex64> = f.data().iter().map(|&v| Complex64::new(v * scale, 0.0)).collect();
    for chunk in data.chunks_mut(grid.len()) {
        transform(&grid, chunk, false);
    }
    SpectralField::from_raw(grid, f.components(), data)
}

/// Inverse transform keeping the real part, without the symmetry check.
pub(crate) fn inverse(f: &SpectralField) -> RealField {
    let grid = *f.grid();
    let mut data = f.data().to_vec();
    for chunk in data.chunks_mut(grid.len()) {
        transform(&grid, chunk, true);
    }
    RealField::from_raw(grid, f.components(), data.into_iter().map(|c| c.re).collect())
}

/// Forward FFT of a sampled field.
pub fn fft_forward(f: &RealField) -> Result<SpectralField> {
    f.ensure_finite()?;
    Ok(forward(f))
}

/// Inverse FFT; rejects spectra that are not Hermitian to
/// [`HERMITIAN_TOLERANCE`].
pub fn fft_inverse(f: &SpectralField) -> Result<RealField> {
    let defect = f.hermitian_defect();
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::SymmetryViolation { defect });
    }
    Ok(inverse(f))
}
