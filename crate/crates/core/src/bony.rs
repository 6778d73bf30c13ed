//! Bony decomposition, commutators, the composition maps `h₁`, `h₂`, and
//! ensemble measurements of the product, commutator and composition
//! inequalities.

use serde::Serialize;

use crate::besov::{aggregate, besov_norm, lp_norm, BesovParams};
use crate::error::{Error, Result};
use crate::lp::{block_hat, low_hat, DyadicPartition};
use crate::par;
use crate::spectral::fft::{forward, inverse};
use crate::spectral::operators::{div_hat, grad_hat};
use crate::spectral::{dealias, product, RealField, SpectralField};

/// Largest `|ρ|` accepted by [`compose_h1`] and [`compose_h2`].
pub const COMPOSITION_LIMIT: f64 = 50.0;

fn check_pair(f: &RealField, g: &RealField, p: &DyadicPartition) -> Result<()> {
    if f.grid() != p.grid() || g.grid() != p.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn sum_terms(terms: Vec<RealField>, fallback: RealField) -> RealField {
    terms.into_iter().reduce(|mut a, b| {
        a.axpy(1.0, &b);
        a
    })
    .unwrap_or(fallback)
}

fn product_components(f: &RealField, g: &RealField) -> usize {
    f.components().max(g.components())
}

/// `Δ̃_q = Δ_{q-1} + Δ_q + Δ_{q+1}` applied to a spectrum.
fn tilde_hat(s: &SpectralField, q: i32, p: &DyadicPartition) -> SpectralField {
    let mut out = block_hat(s, q, p);
    out.axpy(1.0, &block_hat(s, q - 1, p));
    out.axpy(1.0, &block_hat(s, q + 1, p));
    out
}

/// Paraproduct `T_f g = Σ_q S_{q-1} f · Δ_q g`.
pub fn paraproduct(f: &RealField, g: &RealField, p: &DyadicPartition) -> Result<RealField> {
    check_pair(f, g, p)?;
    let (fh, gh) = (forward(f), forward(g));
    let qs: Vec<i32> = p.blocks().collect();
    let terms = par::map_slice(&qs, |&q| product(&inverse(&low_hat(&fh, q - 1, p)), &inverse(&block_hat(&gh, q, p))))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_terms(terms, RealField::zeros(*f.grid(), product_components(f, g))))
}

/// Remainder `R(f, g) = Σ_q Δ_q f · Δ̃_q g`.
pub fn remainder(f: &RealField, g: &RealField, p: &DyadicPartition) -> Result<RealField> {
    check_pair(f, g, p)?;
    let (fh, gh) = (forward(f), forward(g));
    let qs: Vec<i32> = p.blocks().collect();
    let terms = par::map_slice(&qs, |&q| product(&inverse(&block_hat(&fh, q, p)), &inverse(&tilde_hat(&gh, q, p))))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_terms(terms, RealField::zeros(*f.grid(), product_components(f, g))))
}

#[derive(Clone, Debug)]
pub struct BonySplit {
    pub t_fg: RealField,
    pub t_gf: RealField,
    pub r_fg: RealField,
}

impl BonySplit {
    pub fn sum(&self) -> RealField {
        let mut out = self.t_fg.clone();
        out.axpy(1.0, &self.t_gf);
        out.axpy(1.0, &self.r_fg);
        out
    }

    /// `‖T_f g + T_g f + R(f,g) − fg‖_∞ / ‖fg‖_∞` against the dealiased product.
    pub fn reconstruction_error(&self, f: &RealField, g: &RealField) -> Result<f64> {
        let fg = product(f, g)?;
        let scale = fg.max_abs();
        let err = self.sum().max_abs_diff(&fg);
        Ok(if scale > 0.0 { err / scale } else { err })
    }
}

pub fn bony_split(f: &RealField, g: &RealField, p: &DyadicPartition) -> Result<BonySplit> {
    Ok(BonySplit { t_fg: paraproduct(f, g, p)?, t_gf: paraproduct(g, f, p)?, r_fg: remainder(f, g, p)? })
}

/// Empirical `c_q` sequence of one commutator sample.
#[derive(Clone, Debug, Serialize)]
pub struct CqSequence {
    pub q: Vec<i32>,
    pub values: Vec<f64>,
    pub l1_sum: f64,
}

/// Supremum of one term's empirical constant in a three-term breakdown.
#[derive(Clone, Debug, Serialize)]
pub struct TermConstant {
    pub name: String,
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub ensemble_size: usize,
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_q_cq: Option<CqSequence>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermConstant>,
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, &v| if v.is_nan() { f64::NAN } else { m.max(v) })
}

impl InequalityReport {
    fn new(name: impl Into<String>, ratios: Vec<f64>) -> Self {
        InequalityReport {
            name: name.into(),
            ensemble_size: ratios.len(),
            sup_ratio: sup(&ratios),
            ratios,
            per_q_cq: None,
            terms: Vec::new(),
        }
    }

    /// All ratios finite and nonnegative.
    pub fn is_finite(&self) -> bool {
        self.ratios.iter().all(|r| r.is_finite() && *r >= 0.0) && self.sup_ratio.is_finite()
    }

    /// `|a − b| / max(a, b)` for two sup ratios.
    pub fn relative_change(&self, other: &InequalityReport) -> f64 {
        let m = self.sup_ratio.max(other.sup_ratio);
        if m == 0.0 {
            0.0
        } else {
            (self.sup_ratio - other.sup_ratio).abs() / m
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

fn bnorm(f: &RealField, s: f64, p: f64, r: f64, part: &DyadicPartition) -> f64 {
    besov_norm(f, &BesovParams { s, p, r }, part).value
}

fn ensure_positive_s(bp: &BesovParams) -> Result<()> {
    if bp.s > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("product estimates need s > 0, got {}", bp.s)))
    }
}

/// Classical Moser ratio `‖fg‖_{B^s} / (‖f‖_∞‖g‖_{B^s} + ‖g‖_∞‖f‖_{B^s})`.
pub fn moser_ratio(f: &RealField, g: &RealField, bp: &BesovParams, part: &DyadicPartition) -> Result<f64> {
    check_pair(f, g, part)?;
    let lhs = besov_norm(&product(f, g)?, bp, part).value;
    let inf = f64::INFINITY;
    let rhs = lp_norm(f, inf) * besov_norm(g, bp, part).value + lp_norm(g, inf) * besov_norm(f, bp, part).value;
    Ok(ratio(lhs, rhs))
}

pub fn moser_check_classical(
    pairs: &[(RealField, RealField)],
    bp: &BesovParams,
    part: &DyadicPartition,
) -> Result<InequalityReport> {
    ensure_positive_s(bp)?;
    let ratios = par::map_slice(pairs, |(f, g)| moser_ratio(f, g, bp, part)).into_iter().collect::<Result<_>>()?;
    Ok(InequalityReport::new("moser_classical", ratios))
}

/// Hölder exponents `(p₁, p₂, p₃, p₄)` of the generalized product estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderExponents {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl HolderExponents {
    pub fn validate(&self, p: f64) -> Result<()> {
        let allowed = |x: f64| x == 1.0 || x == 2.0 || x.is_infinite();
        for x in [p, self.p1, self.p2, self.p3, self.p4] {
            if !allowed(x) {
                return Err(Error::Config(format!("exponent {x} outside {{1, 2, inf}}")));
            }
        }
        let inv = |x: f64| 1.0 / x;
        let tol = 1e-12;
        if (inv(p) - inv(self.p1) - inv(self.p2)).abs() > tol || (inv(p) - inv(self.p3) - inv(self.p4)).abs() > tol {
            return Err(Error::Config(format!(
                "Hölder relation 1/p = 1/p1 + 1/p2 = 1/p3 + 1/p4 fails for p = {p}, {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-sample quantities of the generalized estimate.
struct GeneralizedSample {
    total: f64,
    paraproduct_fg: f64,
    paraproduct_gf: f64,
    remainder: f64,
}

fn generalized_sample(
    f: &RealField,
    g: &RealField,
    bp: &BesovParams,
    ex: &HolderExponents,
    part: &DyadicPartition,
) -> Result<GeneralizedSample> {
    check_pair(f, g, part)?;
    let split = bony_split(f, g, part)?;
    let (s, p, r) = (bp.s, bp.p, bp.r);
    let a = lp_norm(f, ex.p1) * bnorm(g, s, ex.p2, r, part);
    let b = lp_norm(g, ex.p3) * bnorm(f, s, ex.p4, r, part);
    let lhs = bnorm(&product(f, g)?, s, p, r, part);
    Ok(GeneralizedSample {
        total: ratio(lhs, a + b),
        paraproduct_fg: ratio(bnorm(&split.t_fg, s, p, r, part), a),
        paraproduct_gf: ratio(bnorm(&split.t_gf, s, p, r, part), b),
        remainder: ratio(bnorm(&split.r_fg, s, p, r, part), a),
    })
}

/// Generalized Moser estimate with Hölder-split integrability exponents,
/// including the empirical constants of the paraproduct, symmetric
/// paraproduct and remainder bounds.
pub fn moser_check_generalized(
    pairs: &[(RealField, RealField)],
    bp: &BesovParams,
    ex: &HolderExponents,
    part: &DyadicPartition,
) -> Result<InequalityReport> {
    ensure_positive_s(bp)?;
    ex.validate(bp.p)?;
    let samples = par::map_slice(pairs, |(f, g)| generalized_sample(f, g, bp, ex, part))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let column = |name: &str, pick: fn(&GeneralizedSample) -> f64| {
        let ratios: Vec<f64> = samples.iter().map(pick).collect();
        TermConstant { name: name.into(), sup_ratio: sup(&ratios), ratios }
    };
    let mut report = InequalityReport::new("moser_generalized", samples.iter().map(|s| s.total).collect());
    report.terms = vec![
        column("paraproduct_f_g", |s| s.paraproduct_fg),
        column("paraproduct_g_f", |s| s.paraproduct_gf),
        column("remainder", |s| s.remainder),
    ];
    Ok(report)
}

/// `𝒜` in `[f, Δ_q]𝒜g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorOperator {
    Div,
    Grad,
}

/// Regularity pairing of the commutator estimate at `p = 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorCase {
    /// `s = 1 + N/2`, `f, g ∈ B^s_{2,1}`.
    Critical,
    /// `s = N/2`, `f ∈ B^s_{2,1}`, `g ∈ B^{s+1}_{2,1}`.
    SmoothG,
    /// `s = N/2`, `f ∈ B^{s+1}_{2,1}`, `g ∈ B^s_{2,1}`.
    SmoothF,
}

impl CommutatorCase {
    pub const ALL: [CommutatorCase; 3] = [CommutatorCase::Critical, CommutatorCase::SmoothG, CommutatorCase::SmoothF];

    /// `(s, s_f, s_g)` in dimension `dim`.
    pub fn indices(self, dim: usize) -> (f64, f64, f64) {
        let half = dim as f64 / 2.0;
        match self {
            CommutatorCase::Critical => (1.0 + half, 1.0 + half, 1.0 + half),
            CommutatorCase::SmoothG => (half, half, half + 1.0),
            CommutatorCase::SmoothF => (half, half + 1.0, half),
        }
    }

    /// Case matching `(s, p)` and the extra derivative placement.
    pub fn from_params(bp: &BesovParams, dim: usize, smooth: Option<char>) -> Result<Self> {
        let half = dim as f64 / 2.0;
        if bp.p != 2.0 || bp.r != 1.0 {
            return Err(Error::Config(format!("commutator estimate supports p = 2, r = 1 only, got {bp:?}")));
        }
        match (bp.s, smooth) {
            (s, None) if s == 1.0 + half => Ok(CommutatorCase::Critical),
            (s, Some('g')) if s == half => Ok(CommutatorCase::SmoothG),
            (s, Some('f')) if s == half => Ok(CommutatorCase::SmoothF),
            _ => Err(Error::Config(format!("unsupported commutator combination s = {} in dimension {dim}", bp.s))),
        }
    }
}

/// `[f, Δ_q]𝒜g = f·Δ_q(𝒜g) − Δ_q(f·𝒜g)` for every block.
pub fn commutator_blocks(
    f: &RealField,
    g: &RealField,
    op: CommutatorOperator,
    part: &DyadicPartition,
) -> Result<Vec<(i32, RealField)>> {
    check_pair(f, g, part)?;
    if !f.is_scalar() {
        return Err(Error::ComponentMismatch { expected: 1, found: f.components() });
    }
    let dim = f.grid().dim();
    let gh = forward(g);
    let ag = match op {
        CommutatorOperator::Div => {
            if g.components() != dim {
                return Err(Error::ComponentMismatch { expected: dim, found: g.components() });
            }
            div_hat(&gh)
        }
        CommutatorOperator::Grad => {
            if !g.is_scalar() {
                return Err(Error::ComponentMismatch { expected: 1, found: g.components() });
            }
            grad_hat(&gh)
        }
    };
    let fa = forward(&product(f, &inverse(&ag))?);
    let qs: Vec<i32> = part.blocks().collect();
    par::map_slice(&qs, |&q| {
        let mut c = product(f, &inverse(&block_hat(&ag, q, part)))?;
        c.axpy(-1.0, &inverse(&block_hat(&fa, q, part)));
        Ok((q, c))
    })
    .into_iter()
    .collect()
}

/// Empirical `c_q = 2^{qs}‖[f, Δ_q]𝒜g‖_{L²} / (‖f‖_{B^{s_f}_{2,1}}‖g‖_{B^{s_g}_{2,1}})`.
pub fn commutator_sequence(
    f: &RealField,
    g: &RealField,
    op: CommutatorOperator,
    case: CommutatorCase,
    part: &DyadicPartition,
) -> Result<CqSequence> {
    let (s, sf, sg) = case.indices(f.grid().dim());
    let denom = bnorm(f, sf, 2.0, 1.0, part) * bnorm(g, sg, 2.0, 1.0, part);
    let blocks = commutator_blocks(f, g, op, part)?;
    let q: Vec<i32> = blocks.iter().map(|b| b.0).collect();
    let values: Vec<f64> =
        blocks.iter().map(|(q, c)| ratio(2f64.powf(*q as f64 * s) * lp_norm(c, 2.0), denom)).collect();
    let l1_sum = aggregate(&values, 1.0);
    Ok(CqSequence { q, values, l1_sum })
}

/// Ensemble of commutator samples; ratios are the `ℓ¹` sums of `c_q`, and
/// `per_q_cq` holds the sequence of the worst sample.
pub fn commutator_check(
    pairs: &[(RealField, RealField)],
    op: CommutatorOperator,
    case: CommutatorCase,
    part: &DyadicPartition,
) -> Result<InequalityReport> {
    let seqs = par::map_slice(pairs, |(f, g)| commutator_sequence(f, g, op, case, part))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let name = format!("commutator_{}_{}", serde_json::to_value(op)?.as_str().unwrap_or(""), serde_json::to_value(case)?.as_str().unwrap_or(""));
    let mut report = InequalityReport::new(name, seqs.iter().map(|s| s.l1_sum).collect());
    report.per_q_cq = seqs.into_iter().reduce(|a, b| if b.l1_sum > a.l1_sum { b } else { a });
    Ok(report)
}

/// Remainder regularity ratio `‖R(f,g)‖_{B^{s₁+s₂}} / (‖f‖_{B^{s₁}}‖g‖_{B^{s₂}})`.
pub fn remainder_ratio(
    f: &RealField,
    g: &RealField,
    s1: f64,
    s2: f64,
    p: f64,
    r: f64,
    part: &DyadicPartition,
) -> Result<f64> {
    if s1 + s2 <= 0.0 {
        return Err(Error::Config(format!("remainder estimate needs s1 + s2 > 0, got {}", s1 + s2)));
    }
    let lhs = bnorm(&remainder(f, g, part)?, s1 + s2, p, r, part);
    Ok(ratio(lhs, bnorm(f, s1, p, r, part) * bnorm(g, s2, p, r, part)))
}

pub fn remainder_check(
    pairs: &[(RealField, RealField)],
    s1: f64,
    s2: f64,
    part: &DyadicPartition,
) -> Result<InequalityReport> {
    let ratios = par::map_slice(pairs, |(f, g)| remainder_ratio(f, g, s1, s2, 2.0, 1.0, part))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(InequalityReport::new("remainder_regularity", ratios))
}

/// Shell Bernstein ratios of one field at `p = 2`, in scaled wavenumbers:
/// `(max_q ‖∇Δ_q f‖ / (2^q‖Δ_q f‖), max_q 2^q‖Δ_q f‖ / ‖∇Δ_q f‖)` over
/// shells `q >= 0` carrying energy. The shell bounds give `8/3` and `4/3`.
pub fn bernstein_ratios(f: &RealField, part: &DyadicPartition) -> Result<(f64, f64)> {
    if f.grid() != part.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *f.grid();
    let s = forward(f);
    let total = s.energy();
    let (mut upper, mut lower) = (0.0f64, 0.0f64);
    for q in 0..=part.q_max() {
        let w = part.weights(q);
        let (mut e0, mut e1) = (0.0, 0.0);
        for c in 0..s.components() {
            for (j, z) in s.component(c).iter().enumerate() {
                let a = w[j] * w[j] * z.norm_sqr();
                e0 += a;
                e1 += a * grid.mode_norm_sq(j) as f64;
            }
        }
        if e0 <= 1e-24 * total {
            continue;
        }
        let scale = 2f64.powi(q);
        upper = upper.max(e1.sqrt() / (scale * e0.sqrt()));
        lower = lower.max(scale * e0.sqrt() / e1.sqrt());
    }
    Ok((upper, lower))
}

pub fn bernstein_check(samples: &[RealField], part: &DyadicPartition) -> Result<InequalityReport> {
    let pairs = par::map_slice(samples, |f| bernstein_ratios(f, part)).into_iter().collect::<Result<Vec<_>>>()?;
    let upper: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let lower: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut report = InequalityReport::new("bernstein", upper.clone());
    report.terms = vec![
        TermConstant { name: "gradient_over_shell_scale".into(), sup_ratio: sup(&upper), ratios: upper },
        TermConstant { name: "shell_scale_over_gradient".into(), sup_ratio: sup(&lower), ratios: lower },
    ];
    Ok(report)
}

fn compose(rho: &RealField, h: impl Fn(f64) -> f64) -> Result<RealField> {
    rho.ensure_finite()?;
    let worst = rho.max_abs();
    if worst > COMPOSITION_LIMIT {
        return Err(Error::InvalidInput(format!("|rho| = {worst} exceeds {COMPOSITION_LIMIT}")));
    }
    Ok(dealias(&rho.map(h)))
}

/// `h₁(ρ) = κ̃(1 − e^{−ρ})` with `κ̃ = (γ − 1)κ/n̄`, dealiased.
pub fn compose_h1(rho: &RealField, gamma: f64, kappa: f64, n_bar: f64) -> Result<RealField> {
    let kt = (gamma - 1.0) * kappa / n_bar;
    compose(rho, |r| -kt * (-r).exp_m1())
}

/// `h₂(ρ) = n̄(e^ρ − 1)`, dealiased.
pub fn compose_h2(rho: &RealField, n_bar: f64) -> Result<RealField> {
    compose(rho, |r| n_bar * r.exp_m1())
}

/// Composition ratio `‖h₂(ρ)‖_{B^s} / ((1 + ‖ρ‖_∞)^{[s]+1}‖ρ‖_{B^s})`.
pub fn composition_ratio(rho: &RealField, n_bar: f64, bp: &BesovParams, part: &DyadicPartition) -> Result<f64> {
    let lhs = besov_norm(&compose_h2(rho, n_bar)?, bp, part).value;
    let growth = (1.0 + lp_norm(rho, f64::INFINITY)).powi(bp.s.floor() as i32 + 1);
    Ok(ratio(lhs, growth * besov_norm(rho, bp, part).value))
}

pub fn composition_check(
    samples: &[RealField],
    n_bar: f64,
    bp: &BesovParams,
    part: &DyadicPartition,
) -> Result<InequalityReport> {
    ensure_positive_s(bp)?;
    let ratios =
        par::map_slice(samples, |rho| composition_ratio(rho, n_bar, bp, part)).into_iter().collect::<Result<_>>()?;
    Ok(InequalityReport::new("composition_h2", ratios))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::ensemble::{ensemble_member, random_field, FieldSpec};
    use crate::lp::{build_partition, delta_q, s_q};
    use crate::spectral::Grid;

    fn setup(n: usize) -> (Grid, DyadicPartition) {
        let g = Grid::new(2, n, 2.0 * PI).unwrap();
        (g, build_partition(g).unwrap())
    }

    #[test]
    fn reconstruction_on_random_pairs() {
        let (g, p) = setup(64);
        for i in 0..10 {
            let f = ensemble_member(&g, 1, 21.0, 3, i);
            let h = ensemble_member(&g, 1, 21.0, 4, i);
            let split = bony_split(&f, &h, &p).unwrap();
            assert!(split.reconstruction_error(&f, &h).unwrap() < 1e-12);
        }
    }

    #[test]
    fn paraproduct_matches_direct_sum() {
        let (g, p) = setup(32);
        let f = random_field(&g, &FieldSpec::scalar(-1.0, 10.0), 1);
        let h = random_field(&g, &FieldSpec::scalar(-2.0, 10.0), 2);
        let mut direct = RealField::zeros(g, 1);
        for q in 0..=p.q_max() {
            let low = if q >= 1 { s_q(&f, q - 1, &p).unwrap() } else { RealField::zeros(g, 1) };
            let term = product(&low, &delta_q(&h, q, &p).unwrap()).unwrap();
            direct.axpy(1.0, &term);
        }
        assert!(paraproduct(&f, &h, &p).unwrap().max_abs_diff(&direct) < 1e-13);
        let c = RealField::constant(g, 2.5);
        let t = paraproduct(&c, &h, &p).unwrap();
        let mut expected = h.scaled(2.5);
        expected.axpy(-2.5, &delta_q(&h, -1, &p).unwrap());
        expected.axpy(-2.5, &delta_q(&h, 0, &p).unwrap());
        assert!(t.max_abs_diff(&expected) < 1e-13);
        assert_eq!(paraproduct(&f, &RealField::zeros(g, 1), &p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn separated_tones_have_no_remainder() {
        let (g, p) = setup(64);
        // |k| = 1 sits in q = -1, 0; |k| = 12 sits in q = 3.
        let low = RealField::scalar_fn(g, |x| x[0].cos());
        let high = RealField::scalar_fn(g, |x| (12.0 * x[1]).sin());
        let split = bony_split(&low, &high, &p).unwrap();
        assert!(split.r_fg.max_abs() < 1e-13);
        assert!(split.t_gf.max_abs() < 1e-13);
        assert!(split.t_fg.max_abs_diff(&product(&low, &high).unwrap()) < 1e-13);
    }

    #[test]
    fn commutator_with_constant_vanishes() {
        let (g, p) = setup(32);
        let c = RealField::constant(g, 1.7);
        let u = random_field(&g, &FieldSpec::vector(2, -2.0, 10.0), 5);
        let seq = commutator_sequence(&c, &u, CommutatorOperator::Div, CommutatorCase::Critical, &p).unwrap();
        assert!(seq.values.iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn commutator_of_a_tone_stays_near_its_shell() {
        let (g, p) = setup(64);
        let f = RealField::scalar_fn(g, |x| (6.0 * x[0]).cos());
        let seq = commutator_sequence(&f, &f, CommutatorOperator::Grad, CommutatorCase::Critical, &p).unwrap();
        assert!(seq.l1_sum.is_finite() && seq.l1_sum > 0.0);
        // f·∇f has modes |k| ∈ {0, 12}; only blocks touching 6 or 12 contribute.
        for (q, v) in seq.q.iter().zip(&seq.values) {
            if *q <= 0 {
                assert!(*v < 1e-12, "q = {q}: {v}");
            }
        }
    }

    #[test]
    fn commutator_case_selection() {
        let bp = BesovParams::l2_sum(2.0);
        assert_eq!(CommutatorCase::from_params(&bp, 2, None).unwrap(), CommutatorCase::Critical);
        assert_eq!(CommutatorCase::from_params(&BesovParams::l2_sum(1.0), 2, Some('f')).unwrap(), CommutatorCase::SmoothF);
        assert!(CommutatorCase::from_params(&BesovParams::l2_sum(0.3), 2, None).is_err());
        assert!(CommutatorCase::from_params(&BesovParams::new(2.0, 1.0, 1.0).unwrap(), 2, None).is_err());
    }

    #[test]
    fn composition_special_values() {
        let (g, _) = setup(32);
        let zero = RealField::zeros(g, 1);
        assert_eq!(compose_h1(&zero, 5.0 / 3.0, 3.0, 1.0).unwrap().max_abs(), 0.0);
        assert_eq!(compose_h2(&zero, 1.0).unwrap().max_abs(), 0.0);
        let ln2 = RealField::constant(g, 2f64.ln());
        let h2 = compose_h2(&ln2, 1.0).unwrap();
        assert!(h2.data().iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(compose_h2(&RealField::constant(g, 51.0), 1.0).is_err());
    }

    #[test]
    fn bernstein_shell_bounds() {
        let (g, p) = setup(64);
        let samples: Vec<RealField> = (0..10).map(|i| ensemble_member(&g, 1, 21.0, 8, i)).collect();
        let rep = bernstein_check(&samples, &p).unwrap();
        assert!(rep.terms[0].sup_ratio <= 8.0 / 3.0 && rep.terms[1].sup_ratio <= 4.0 / 3.0);
        assert!(rep.sup_ratio >= 0.75);
    }

    #[test]
    fn holder_relations() {
        let ok = HolderExponents { p1: f64::INFINITY, p2: 2.0, p3: 2.0, p4: f64::INFINITY };
        assert!(ok.validate(2.0).is_ok());
        let bad = HolderExponents { p1: 2.0, p2: 2.0, p3: 2.0, p4: f64::INFINITY };
        assert!(bad.validate(2.0).is_err());
        let sum = HolderExponents { p1: 2.0, p2: 2.0, p3: 1.0, p4: f64::INFINITY };
        assert!(sum.validate(1.0).is_ok());
    }

    #[test]
    fn zero_factor_gives_zero_ratio() {
        let (g, p) = setup(32);
        let f = random_field(&g, &FieldSpec::scalar(-2.0, 10.0), 9);
        let z = RealField::zeros(g, 1);
        let bp = BesovParams::l2_sum(1.0);
        let ex = HolderExponents { p1: f64::INFINITY, p2: 2.0, p3: 2.0, p4: f64::INFINITY };
        let rep = moser_check_generalized(&[(f, z)], &bp, &ex, &p).unwrap();
        assert_eq!(rep.sup_ratio, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn ratios_are_scale_invariant(seed in 0u64..1000, a in 0.01f64..100.0, b in -100.0f64..-0.01) {
            let (g, p) = setup(32);
            let f = random_field(&g, &FieldSpec::scalar(-2.0, 10.0), seed);
            let h = random_field(&g, &FieldSpec::scalar(-1.0, 10.0), seed + 1);
            let bp = BesovParams::l2_sum(1.5);
            let r0 = moser_ratio(&f, &h, &bp, &p).unwrap();
            let r1 = moser_ratio(&f.scaled(a), &h.scaled(b), &bp, &p).unwrap();
            prop_assert!((r0 - r1).abs() <= 1e-10 * r0);
            let c0 = commutator_sequence(&f, &h, CommutatorOperator::Grad, CommutatorCase::SmoothG, &p).unwrap();
            let c1 = commutator_sequence(&f.scaled(a), &h.scaled(b), CommutatorOperator::Grad, CommutatorCase::SmoothG, &p).unwrap();
            prop_assert!((c0.l1_sum - c1.l1_sum).abs() <= 1e-10 * c0.l1_sum);
        }

        #[test]
        fn h_maps_are_monotone_and_sign_preserving(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let h1 = |r: f64| -(-r).exp_m1();
            let h2 = |r: f64| r.exp_m1();
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(h1(lo) <= h1(hi) && h2(lo) <= h2(hi));
            prop_assert_eq!(h1(x).signum() * x.signum() >= 0.0, true);
            prop_assert_eq!(h2(x).signum() * x.signum() >= 0.0, true);
        }
    }
}
