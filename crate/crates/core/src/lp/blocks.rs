use std::io::Write;

use serde::Serialize;

use super::partition::DyadicPartition;
use crate::besov::lp_norm;
use crate::error::{Error, Result};
use crate::par;
use crate::spectral::fft::{forward, inverse};
use crate::spectral::{Grid, RealField, SpectralField};

fn check_grid(f: &RealField, p: &DyadicPartition) -> Result<()> {
    if f.grid() == p.grid() {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Multiplies every component of `s` by a real per-mode weight table.
pub(crate) fn weighted(s: &SpectralField, w: &[f64]) -> SpectralField {
    let n = s.grid().len();
    let mut out = s.clone();
    par::for_each_chunk_mut(out.data_mut(), n, |_, comp| {
        comp.iter_mut().zip(w).for_each(|(c, &x)| *c *= x);
    });
    out
}

/// Weight table of `S_q = Σ_{p ≤ q-1} Δ_p`; empty sum for `q <= -1`.
pub(crate) fn low_weights(p: &DyadicPartition, q: i32) -> Vec<f64> {
    let n = p.grid().len();
    let mut w = vec![0.0; n];
    for b in -1..=(q - 1).min(p.q_max()) {
        w.iter_mut().zip(p.weights(b)).for_each(|(a, x)| *a += x);
    }
    w
}

pub(crate) fn block_hat(s: &SpectralField, q: i32, p: &DyadicPartition) -> SpectralField {
    if q < -1 || q > p.q_max() {
        return SpectralField::zeros(*s.grid(), s.components());
    }
    weighted(s, p.weights(q))
}

pub(crate) fn low_hat(s: &SpectralField, q: i32, p: &DyadicPartition) -> SpectralField {
    weighted(s, &low_weights(p, q))
}

/// `Δ_q f`.
pub fn delta_q(f: &RealField, q: i32, p: &DyadicPartition) -> Result<RealField> {
    check_grid(f, p)?;
    p.check_block(q)?;
    Ok(inverse(&block_hat(&forward(f), q, p)))
}

/// Low-frequency cutoff `S_q f = Σ_{p ≤ q-1} Δ_p f`, `q >= 0`.
pub fn s_q(f: &RealField, q: i32, p: &DyadicPartition) -> Result<RealField> {
    check_grid(f, p)?;
    if q < 0 {
        return Err(Error::BlockOutOfRange { q, min: 0, max: i32::MAX });
    }
    Ok(inverse(&low_hat(&forward(f), q, p)))
}

/// All blocks of one field, computed from a single forward transform.
#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub source_grid: Grid,
    pub blocks: Vec<(i32, RealField)>,
}

impl DyadicDecomposition {
    pub fn block(&self, q: i32) -> Option<&RealField> {
        self.blocks.iter().find(|(b, _)| *b == q).map(|(_, f)| f)
    }

    /// `Σ_q Δ_q f`.
    pub fn reconstruct(&self) -> RealField {
        let mut out = RealField::zeros(self.source_grid, self.blocks.first().map_or(1, |(_, f)| f.components()));
        for (_, b) in &self.blocks {
            out.axpy(1.0, b);
        }
        out
    }
}

pub fn decompose(f: &RealField, p: &DyadicPartition) -> Result<DyadicDecomposition> {
    check_grid(f, p)?;
    let s = forward(f);
    let qs: Vec<i32> = p.blocks().collect();
    let blocks = par::map_slice(&qs, |&q| (q, inverse(&block_hat(&s, q, p))));
    Ok(DyadicDecomposition { source_grid: *f.grid(), blocks })
}

/// Outcome of the almost-orthogonality check.
#[derive(Clone, Debug, Serialize)]
pub struct OrthogonalityReport {
    /// `max ‖Δ_pΔ_q f‖₂ / ‖f‖₂` over `|p − q| ≥ 2`.
    pub max_ratio: f64,
    pub worst_pair: Option<(i32, i32)>,
    pub pairs_checked: usize,
    /// Same ratio for adjacent blocks, which generally overlap.
    pub adjacent_max_ratio: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn check_almost_orthogonality(f: &RealField, p: &DyadicPartition) -> Result<OrthogonalityReport> {
    check_grid(f, p)?;
    let s = forward(f);
    let norm = lp_norm(f, 2.0);
    let pairs: Vec<(i32, i32)> = p.blocks().flat_map(|a| p.blocks().filter(move |&b| b > a).map(move |b| (a, b))).collect();
    let values = par::map_slice(&pairs, |&(a, b)| {
        let comp = inverse(&block_hat(&block_hat(&s, b, p), a, p));
        ratio(lp_norm(&comp, 2.0), norm)
    });
    let mut report =
        OrthogonalityReport { max_ratio: 0.0, worst_pair: None, pairs_checked: 0, adjacent_max_ratio: 0.0 };
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        if b - a >= 2 {
            report.pairs_checked += 1;
            if v > report.max_ratio || report.worst_pair.is_none() {
                report.max_ratio = report.max_ratio.max(v);
                report.worst_pair = Some((a, b));
            }
        } else {
            report.adjacent_max_ratio = report.adjacent_max_ratio.max(v);
        }
    }
    Ok(report)
}

/// Outcome of the product-support check `Δ_q(S_{p-1}f Δ_p g) = 0`, `|p − q| ≥ 5`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductSupportReport {
    /// `max ‖Δ_q(S_{p-1}f Δ_p g)‖₂ / (‖f‖_∞ ‖g‖₂)` over `|p − q| ≥ 5`.
    pub max_ratio: f64,
    pub pairs_checked: usize,
}

pub fn check_product_support(f: &RealField, g: &RealField, p: &DyadicPartition) -> Result<ProductSupportReport> {
    check_grid(f, p)?;
    check_grid(g, p)?;
    let fs = forward(f);
    let gs = forward(g);
    let scale = lp_norm(f, f64::INFINITY) * lp_norm(g, 2.0);
    let qs: Vec<i32> = p.blocks().collect();
    let per_p = par::map_slice(&qs, |&pp| {
        let low = inverse(&low_hat(&fs, pp - 1, p));
        let hi = inverse(&block_hat(&gs, pp, p));
        let prod = crate::spectral::product(&low, &hi).expect("same grid");
        let ps = forward(&prod);
        let mut worst = 0.0f64;
        let mut count = 0;
        for q in p.blocks().filter(|q| (q - pp).abs() >= 5) {
            count += 1;
            worst = worst.max(ratio(lp_norm(&inverse(&block_hat(&ps, q, p)), 2.0), scale));
        }
        (worst, count)
    });
    Ok(ProductSupportReport {
        max_ratio: per_p.iter().map(|r| r.0).fold(0.0, f64::max),
        pairs_checked: per_p.iter().map(|r| r.1).sum(),
    })
}

/// One row of the per-block energy table.
#[derive(Clone, Debug, Serialize)]
pub struct BlockRow {
    pub q: i32,
    #[serde(rename = "L2_norm")]
    pub l2_norm: f64,
    #[serde(rename = "Lp_norm")]
    pub lp_norm: f64,
    /// Smallest physical `|k|` carrying energy in the block (0 if empty).
    pub support_min_k: f64,
    pub support_max_k: f64,
}

/// Per-block norms and occupied wavenumber range of `f`.
pub fn block_table(f: &RealField, p: &DyadicPartition, lp: f64) -> Result<Vec<BlockRow>> {
    check_grid(f, p)?;
    let s = forward(f);
    let grid = *f.grid();
    let n = grid.len();
    let qs: Vec<i32> = p.blocks().collect();
    // Coefficients below this floor are transform round-off, not support.
    let peak = s.data().iter().fold(0.0f64, |m, c| m.max(c.norm()));
    Ok(par::map_slice(&qs, |&q| {
        let bs = block_hat(&s, q, p);
        let block = inverse(&bs);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for c in 0..bs.components() {
            for (j, v) in bs.component(c).iter().enumerate() {
                if peak > 0.0 && v.norm() > 1e-13 * peak {
                    let k = grid.wavevector(j);
                    let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                    lo = lo.min(kk);
                    hi = hi.max(kk);
                }
            }
        }
        debug_assert!(bs.data().len() == n * bs.components());
        BlockRow {
            q,
            l2_norm: lp_norm(&block, 2.0),
            lp_norm: lp_norm(&block, lp),
            support_min_k: if lo.is_finite() { lo } else { 0.0 },
            support_max_k: hi,
        }
    }))
}

pub fn write_block_csv(rows: &[BlockRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
