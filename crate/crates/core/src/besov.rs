//! Discrete Besov and Chemin–Lerner norms.
//!
//! `‖f‖_{B^s_{p,r}} = ‖(2^{qs} ‖Δ_q f‖_{L^p})_{q=-1..q_max}‖_{ℓ^r}`, with the
//! ladder truncated at the grid's `q_max`. Vector fields use the pointwise
//! Euclidean magnitude inside `L^p`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{block_hat, DyadicPartition};
use crate::par;
use crate::series::{time_norm, TimeSeries};
use crate::spectral::fft::{forward, inverse};
use crate::spectral::{RealField, SpectralField};

/// Serde for exponents in `[1, ∞]`; infinity is written as `"inf"`.
pub mod exponent {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" || t == "infinity" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid exponent {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovParams {
    pub s: f64,
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(with = "exponent")]
    pub r: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        let ok = |x: f64| x >= 1.0 && !x.is_nan();
        if !s.is_finite() || !ok(p) || !ok(r) {
            return Err(Error::Config(format!("invalid Besov indices (s, p, r) = ({s}, {p}, {r})")));
        }
        Ok(BesovParams { s, p, r })
    }

    /// `B^s_{2,1}`, the scale used by the iteration monitors.
    pub fn l2_sum(s: f64) -> Self {
        BesovParams { s, p: 2.0, r: 1.0 }
    }
}

/// Critical regularity `σ = 1 + N/2`.
pub fn critical_index(dim: usize) -> f64 {
    1.0 + dim as f64 / 2.0
}

/// Uniform-grid `L^p` norm, `p = ∞` giving the largest sample magnitude.
pub fn lp_norm(f: &RealField, p: f64) -> f64 {
    let n = f.grid().len();
    let mag: Vec<f64> = if f.is_scalar() {
        f.data().iter().map(|v| v.abs()).collect()
    } else {
        (0..n)
            .map(|j| (0..f.components()).map(|c| f.component(c)[j].powi(2)).sum::<f64>().sqrt())
            .collect()
    };
    if p.is_infinite() {
        return mag.iter().fold(0.0, |m, &v| m.max(v));
    }
    let powered: Vec<f64> = if p == 2.0 { mag.iter().map(|v| v * v).collect() } else { mag.iter().map(|v| v.powf(p)).collect() };
    (par::sum(&powered) * f.grid().cell_volume()).powf(1.0 / p)
}

/// `L²` norm from Fourier coefficients (Parseval).
pub fn l2_norm_spectral(s: &SpectralField) -> f64 {
    (s.energy() * s.grid().volume()).sqrt()
}

/// `ℓ^r` norm of a finite sequence.
pub fn aggregate(values: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if r == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else {
        values.iter().map(|v| v.abs().powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// `‖Δ_q f‖_{L^p}` for `q = -1..=q_max`, via physical-space quadrature.
pub fn block_norms(f: &RealField, p: f64, partition: &DyadicPartition) -> Vec<f64> {
    let s = forward(f);
    let qs: Vec<i32> = partition.blocks().collect();
    par::map_slice(&qs, |&q| lp_norm(&inverse(&block_hat(&s, q, partition)), p))
}

/// `‖Δ_q f‖_{L²}` for `q = -1..=q_max`, from the spectrum.
pub fn block_l2_norms_spectral(s: &SpectralField, partition: &DyadicPartition) -> Vec<f64> {
    let grid = s.grid();
    let n = grid.len();
    let vol = grid.volume();
    let qs: Vec<i32> = partition.blocks().collect();
    par::map_slice(&qs, |&q| {
        let w = partition.weights(q);
        let mut acc = 0.0;
        for c in 0..s.components() {
            acc += s.component(c).iter().zip(w).map(|(z, x)| x * x * z.norm_sqr()).sum::<f64>();
        }
        debug_assert_eq!(w.len(), n);
        (acc * vol).sqrt()
    })
}

fn weights_2qs(partition: &DyadicPartition, s: f64) -> Vec<f64> {
    partition.blocks().map(|q| 2f64.powf(q as f64 * s)).collect()
}

/// Besov norm with its per-block breakdown.
#[derive(Clone, Debug, Serialize)]
pub struct BesovNorm {
    pub params: BesovParams,
    pub q_range: (i32, i32),
    /// `(q, 2^{qs} ‖Δ_q f‖_{L^p})`.
    pub per_q: Vec<(i32, f64)>,
    pub value: f64,
}

impl BesovNorm {
    fn from_blocks(params: BesovParams, partition: &DyadicPartition, norms: &[f64]) -> Self {
        let per_q: Vec<(i32, f64)> = partition
            .blocks()
            .zip(norms.iter().zip(weights_2qs(partition, params.s)))
            .map(|(q, (n, w))| (q, w * n))
            .collect();
        let value = aggregate(&per_q.iter().map(|x| x.1).collect::<Vec<_>>(), params.r);
        BesovNorm { params, q_range: (-1, partition.q_max()), per_q, value }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with one row per block.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q", "weighted_block_norm"]).map_err(|e| Error::InvalidInput(e.to_string()))?;
        for (q, v) in &self.per_q {
            w.write_record([q.to_string(), format!("{v:e}")]).map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn besov_norm(f: &RealField, params: &BesovParams, partition: &DyadicPartition) -> BesovNorm {
    BesovNorm::from_blocks(*params, partition, &block_norms(f, params.p, partition))
}

/// `B^s_{2,r}` norm from the spectrum; equal to [`besov_norm`] with `p = 2`.
pub fn besov_norm_spectral(s: &SpectralField, sreg: f64, r: f64, partition: &DyadicPartition) -> f64 {
    let norms = block_l2_norms_spectral(s, partition);
    let weighted: Vec<f64> = norms.iter().zip(weights_2qs(partition, sreg)).map(|(n, w)| n * w).collect();
    aggregate(&weighted, r)
}

/// `‖Δ_q f(t)‖_{L^p}` for every snapshot: `[snapshot][q + 1]`.
fn block_norm_history(ts: &TimeSeries<RealField>, p: f64, partition: &DyadicPartition) -> Vec<Vec<f64>> {
    par::map_slice(ts.snapshots(), |f| {
        if p == 2.0 {
            block_l2_norms_spectral(&forward(f), partition)
        } else {
            block_norms(f, p, partition)
        }
    })
}

/// Chemin–Lerner norm `‖f‖_{L̃^ρ_T(B^s_{p,r})}`: time norm inside the `ℓ^r` sum.
pub fn chemin_lerner_norm(
    ts: &TimeSeries<RealField>,
    params: &BesovParams,
    rho: f64,
    partition: &DyadicPartition,
) -> Result<f64> {
    if rho.is_finite() && ts.len() < 2 {
        return Err(Error::Quadrature { needed: 2, got: ts.len() });
    }
    let history = block_norm_history(ts, params.p, partition);
    let weights = weights_2qs(partition, params.s);
    let per_q = (0..partition.num_blocks())
        .map(|b| {
            let series: Vec<f64> = history.iter().map(|h| h[b]).collect();
            time_norm(ts.times(), &series, rho).map(|v| v * weights[b])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(aggregate(&per_q, params.r))
}

/// Time-outer norm `‖f‖_{L^ρ_T(B^s_{p,r})}`.
pub fn time_outer_norm(
    ts: &TimeSeries<RealField>,
    params: &BesovParams,
    rho: f64,
    partition: &DyadicPartition,
) -> Result<f64> {
    let history = block_norm_history(ts, params.p, partition);
    let weights = weights_2qs(partition, params.s);
    let values: Vec<f64> = history
        .iter()
        .map(|h| aggregate(&h.iter().zip(&weights).map(|(n, w)| n * w).collect::<Vec<_>>(), params.r))
        .collect();
    time_norm(ts.times(), &values, rho)
}

/// Both orderings of the time and frequency norms, and the inequality that
/// Minkowski's inequality predicts between them.
#[derive(Clone, Debug, Serialize)]
pub struct TimeNormOrdering {
    pub chemin_lerner: f64,
    pub time_outer: f64,
    /// `"<="` when `r >= ρ`, `">="` when `r <= ρ`, `"=="` when both.
    pub predicted: &'static str,
    pub holds: bool,
}

pub fn compare_time_norms(
    ts: &TimeSeries<RealField>,
    params: &BesovParams,
    rho: f64,
    partition: &DyadicPartition,
    rel_tol: f64,
) -> Result<TimeNormOrdering> {
    let cl = chemin_lerner_norm(ts, params, rho, partition)?;
    let outer = time_outer_norm(ts, params, rho, partition)?;
    let slack = rel_tol * cl.abs().max(outer.abs());
    let le = cl <= outer + slack;
    let ge = cl + slack >= outer;
    let (predicted, holds) = match params.r.partial_cmp(&rho) {
        Some(std::cmp::Ordering::Equal) => ("==", le && ge),
        Some(std::cmp::Ordering::Greater) => ("<=", le),
        _ => (">=", ge),
    };
    Ok(TimeNormOrdering { chemin_lerner: cl, time_outer: outer, predicted, holds })
}

/// One measured embedding ratio.
#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingEntry {
    pub name: String,
    pub ratio: f64,
    /// Bound the ratio must respect when the constant is explicit.
    pub bound: Option<f64>,
}

impl EmbeddingEntry {
    pub fn holds(&self) -> bool {
        self.ratio.is_finite() && self.bound.is_none_or(|b| self.ratio <= b * (1.0 + 1e-12))
    }
}

/// Embedding ratios of one field at the critical index `s = N/2 + 1`, `p = 2`.
pub fn check_embeddings(f: &RealField, partition: &DyadicPartition) -> Vec<EmbeddingEntry> {
    let dim = f.grid().dim();
    let s = critical_index(dim);
    let norms = block_norms(f, 2.0, partition);
    let at = |sreg: f64, r: f64| BesovNorm::from_blocks(BesovParams { s: sreg, p: 2.0, r }, partition, &norms).value;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let mut out = Vec::new();
    for (r, rt) in [(1.0, 2.0), (1.0, f64::INFINITY), (2.0, f64::INFINITY)] {
        out.push(EmbeddingEntry {
            name: format!("B^s_2,{r} -> B^s_2,{rt}"),
            ratio: ratio(at(s, rt), at(s, r)),
            bound: Some(1.0),
        });
    }
    out.push(EmbeddingEntry {
        name: "B^s_2,1 -> B^(s-1)_2,1".into(),
        ratio: ratio(at(s - 1.0, 1.0), at(s, 1.0)),
        bound: Some(2.0),
    });
    out.push(EmbeddingEntry {
        name: "B^(N/2)_2,1 -> L^inf".into(),
        ratio: ratio(lp_norm(f, f64::INFINITY), at(dim as f64 / 2.0, 1.0)),
        bound: None,
    });
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::ensemble::{random_field, FieldSpec};
    use crate::lp::build_partition;
    use crate::spectral::Grid;

    fn setup(n: usize) -> (Grid, DyadicPartition) {
        let g = Grid::new(2, n, 2.0 * PI).unwrap();
        (g, build_partition(g).unwrap())
    }

    #[test]
    fn lp_norm_of_constants_and_tones() {
        let (g, _) = setup(32);
        let c = RealField::constant(g, -3.0);
        let v = g.volume();
        assert!((lp_norm(&c, 2.0) - 3.0 * v.sqrt()).abs() < 1e-12);
        assert!((lp_norm(&c, 1.0) - 3.0 * v).abs() < 1e-11);
        assert_eq!(lp_norm(&c, f64::INFINITY), 3.0);
        let tone = RealField::scalar_fn(g, |x| (x[0] + 0.3).sin());
        let h = g.spacing();
        assert!((lp_norm(&tone, f64::INFINITY) - 1.0).abs() <= h * h);
    }

    #[test]
    fn parseval() {
        let (g, _) = setup(64);
        for seed in 0..100 {
            let f = random_field(&g, &FieldSpec::scalar(-1.0, 21.0), seed);
            let a = lp_norm(&f, 2.0);
            let b = l2_norm_spectral(&forward(&f));
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn zero_and_constant_fields() {
        let (g, p) = setup(32);
        let bp = BesovParams::new(1.5, 2.0, 1.0).unwrap();
        assert_eq!(besov_norm(&RealField::zeros(g, 1), &bp, &p).value, 0.0);
        let c = RealField::constant(g, 2.0);
        let expected = 2f64.powf(-1.5) * 2.0 * g.volume().sqrt();
        assert!((besov_norm(&c, &bp, &p).value - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn single_tone_in_one_shell() {
        let (g, p) = setup(64);
        // |k| = 3 lies only in the shells q = 1 (φ(1.5)) and q = 2 (φ(0.75) = 0).
        let f = RealField::scalar_fn(g, |x| (3.0 * x[1]).cos());
        let s = 0.7;
        let bp = BesovParams::new(s, 2.0, 1.0).unwrap();
        let weight = crate::lp::phi(1.5);
        let expected = 2f64.powf(s) * weight * lp_norm(&f, 2.0);
        let got = besov_norm(&f, &bp, &p);
        assert!((got.value - expected).abs() < 1e-12 * expected);
        assert!(got.per_q.iter().filter(|(_, v)| *v > 1e-12 * got.value).count() == 1);
    }

    #[test]
    fn spectral_and_physical_routes_agree() {
        let (g, p) = setup(64);
        for seed in 0..10 {
            let f = random_field(&g, &FieldSpec::vector(2, -2.0, 21.0), seed);
            let bp = BesovParams::l2_sum(2.0);
            let a = besov_norm(&f, &bp, &p).value;
            let b = besov_norm_spectral(&forward(&f), 2.0, 1.0, &p);
            assert!((a - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn chemin_lerner_on_constant_series() {
        let (g, p) = setup(32);
        let f = random_field(&g, &FieldSpec::scalar(-2.0, 10.0), 1);
        let bp = BesovParams::l2_sum(1.0);
        let times = vec![0.0, 0.1, 0.25, 0.5];
        let ts = TimeSeries::new(times, vec![f.clone(); 4]).unwrap();
        let b = besov_norm(&f, &bp, &p).value;
        let inf = chemin_lerner_norm(&ts, &bp, f64::INFINITY, &p).unwrap();
        assert!((inf - b).abs() < 1e-12 * b);
        let one = chemin_lerner_norm(&ts, &bp, 1.0, &p).unwrap();
        assert!((one - 0.5 * b).abs() < 1e-12 * b);
        let single = TimeSeries::constant(f);
        assert!(matches!(chemin_lerner_norm(&single, &bp, 1.0, &p), Err(Error::Quadrature { .. })));
        assert!(chemin_lerner_norm(&single, &bp, f64::INFINITY, &p).is_ok());
    }

    #[test]
    fn embeddings_on_random_fields() {
        let (g, p) = setup(64);
        for seed in 0..20 {
            let f = random_field(&g, &FieldSpec::scalar(-2.0, 21.0), seed);
            for e in check_embeddings(&f, &p) {
                assert!(e.holds(), "{} ratio {}", e.name, e.ratio);
            }
        }
    }

    #[test]
    fn exponent_serde() {
        let bp = BesovParams::new(1.0, f64::INFINITY, 1.0).unwrap();
        let text = serde_json::to_string(&bp).unwrap();
        assert!(text.contains("\"inf\""));
        let back: BesovParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, bp);
        assert!(BesovParams::new(1.0, 0.5, 1.0).is_err());
    }
}
