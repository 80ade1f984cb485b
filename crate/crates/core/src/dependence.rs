//! Copulas, tail indices, hazards, conditional CDFs and rank correlations.
//!
//! Each component has the Marshall–Olkin type copula
//!
//! ```text
//! C(u, v) = u · v^{α₂/(α₂+α₃)}   if u^{1/(α₁+α₃)} <= v^{1/(α₂+α₃)}
//!           u^{α₁/(α₁+α₃)} · v   otherwise
//! ```
//!
//! For the mixture two different objects are called "the copula":
//! the weighted mixture of the component copulas, `p C₁ + (1-p) C₂`, and the
//! copula of the mixture distribution, `H(F₁⁻¹(u), F₂⁻¹(v))`. They differ
//! whenever the marginals of the components differ. [`CopulaModel`] selects
//! one; sample-based rank statistics estimate the latter.
//!
//! Closed-form "published" expressions for the upper tail index, Kendall's τ,
//! Spearman's ρ and the conditional CDF are provided as `*_verbatim`. Several
//! of them leave their mathematical range, so they are reported next to
//! numeric values computed from the model by quadrature and never used for
//! anything else.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvge::{BvgePair, BvgeParams, Region};
use crate::ge::GeParams;
use crate::math::{integrate, ln_add_exp, Quad};
use crate::mixture::MixtureParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaModel {
    /// `p C₁(u, v) + (1-p) C₂(u, v)`.
    ComponentMixture,
    /// Copula of the mixture distribution itself.
    Distribution,
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Copula of one component at `(u, v)`.
pub fn copula_component(c: &BvgeParams, u: f64, v: f64) -> f64 {
    let (u, v) = (clamp01(u), clamp01(v));
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    let [a1, a2, a3] = c.shapes();
    let (s1, s2) = (a1 + a3, a2 + a3);
    // compare u^{1/s1} with v^{1/s2} on the log scale
    if u.ln() / s1 <= v.ln() / s2 {
        u * v.powf(a2 / s2)
    } else {
        u.powf(a1 / s1) * v
    }
}

/// `p C₁(u, v) + (1-p) C₂(u, v)`.
pub fn copula_mixture(m: &MixtureParams, u: f64, v: f64) -> f64 {
    m.p() * copula_component(m.comp0(), u, v) + (1.0 - m.p()) * copula_component(m.comp1(), u, v)
}

/// `H(F₁⁻¹(u), F₂⁻¹(v))` with `H` the mixture CDF and `Fᵢ` its marginals.
pub fn copula_distribution(m: &MixtureParams, u: f64, v: f64) -> f64 {
    let (u, v) = (clamp01(u), clamp01(v));
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    if u == 1.0 {
        return v;
    }
    if v == 1.0 {
        return u;
    }
    let x1 = m.marginal_quantile(1, u).expect("u in (0,1)");
    let x2 = m.marginal_quantile(2, v).expect("v in (0,1)");
    m.cdf(x1, x2)
}

pub fn copula(m: &MixtureParams, model: CopulaModel, u: f64, v: f64) -> f64 {
    match model {
        CopulaModel::ComponentMixture => copula_mixture(m, u, v),
        CopulaModel::Distribution => copula_distribution(m, u, v),
    }
}

/// Tail dependence of the mixture copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailIndices {
    /// The lower index is 0 for every parameter value.
    pub lower: f64,
    /// `C(t, t) / t` at `t = 1e-6`.
    pub lower_ratio_at_1e6: f64,
    /// Published closed form, unverified; exceeds 1 for typical parameters.
    pub upper_verbatim: f64,
    /// Extrapolated limit of `(1 - 2t + C(t, t)) / (1 - t)`, clamped to `[0, 1]`.
    pub upper_numeric: f64,
    /// The extrapolated value before clamping left `[0, 1]`.
    pub upper_numeric_clamped: bool,
}

/// `2 - p α₂/(α₁+α₂+α₃) - (1-p) β₂/(β₁+β₂+β₃)`, as published.
pub fn tail_upper_verbatim(m: &MixtureParams) -> f64 {
    let a = m.comp0();
    let b = m.comp1();
    2.0 - m.p() * a.alpha2() / a.shape_sum() - (1.0 - m.p()) * b.alpha2() / b.shape_sum()
}

/// `C(t, t) / t`.
pub fn lower_tail_ratio(m: &MixtureParams, model: CopulaModel, t: f64) -> f64 {
    copula(m, model, t, t) / t
}

/// `Ĉ(s, s) / s = P(U > 1-s, V > 1-s) / s`, computed from the joint survival
/// at upper marginal quantiles so that it stays accurate for tiny `s`.
pub fn upper_tail_ratio(m: &MixtureParams, model: CopulaModel, s: f64) -> f64 {
    match model {
        CopulaModel::Distribution => {
            let x1 = m.marginal_quantile_upper(1, s).expect("s in (0,1)");
            let x2 = m.marginal_quantile_upper(2, s).expect("s in (0,1)");
            m.survival(x1, x2) / s
        }
        CopulaModel::ComponentMixture => {
            m.p() * component_upper_ratio(m.comp0(), s) + (1.0 - m.p()) * component_upper_ratio(m.comp1(), s)
        }
    }
}

fn component_upper_ratio(c: &BvgeParams, s: f64) -> f64 {
    let x1 = c.marginal1().quantile_upper(s).expect("s in (0,1)");
    let x2 = c.marginal2().quantile_upper(s).expect("s in (0,1)");
    c.survival(x1, x2) / s
}

/// Richardson-extrapolated limit of `upper_tail_ratio` along `s = 10⁻ᵏ`,
/// `k = 4..=10`, assuming a leading error term linear in `s`.
pub fn upper_tail_numeric(m: &MixtureParams, model: CopulaModel) -> (f64, bool) {
    let r: Vec<f64> = (4..=10).map(|k| upper_tail_ratio(m, model, 10f64.powi(-k))).collect();
    let n = r.len();
    let v = (10.0 * r[n - 1] - r[n - 2]) / 9.0;
    let out = !(0.0..=1.0).contains(&v);
    (v.clamp(0.0, 1.0), out)
}

pub fn tail_indices(m: &MixtureParams, model: CopulaModel) -> TailIndices {
    let (upper_numeric, upper_numeric_clamped) = upper_tail_numeric(m, model);
    TailIndices {
        lower: 0.0,
        lower_ratio_at_1e6: lower_tail_ratio(m, model, 1e-6),
        upper_verbatim: tail_upper_verbatim(m),
        upper_numeric,
        upper_numeric_clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum HazardError {
    #[error("joint survival underflows at ({t1}, {t2})")]
    SurvivalUnderflow { t1: f64, t2: f64 },
    #[error("hazard needs positive arguments, got ({t1}, {t2})")]
    NonPositive { t1: f64, t2: f64 },
}

fn mixture_survival_checked(m: &MixtureParams, t1: f64, t2: f64) -> Result<f64, HazardError> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(HazardError::NonPositive { t1, t2 });
    }
    let s = m.survival(t1, t2);
    if s > 0.0 && s.is_normal() {
        Ok(s)
    } else {
        Err(HazardError::SurvivalUnderflow { t1, t2 })
    }
}

/// `f(t₁, t₂) / S(t₁, t₂)`, with the diagonal density used when `t₁ = t₂`.
pub fn hazard_ratio(m: &MixtureParams, t1: f64, t2: f64) -> Result<f64, HazardError> {
    let s = mixture_survival_checked(m, t1, t2)?;
    let pair = BvgePair { x1: t1, x2: t2, region: Region::classify(t1, t2, 0.0) };
    Ok(m.density(&pair).value() / s)
}

/// `(-∂ ln S/∂t₁, -∂ ln S/∂t₂)` from the analytic survival derivatives.
pub fn hazard_gradient(m: &MixtureParams, t1: f64, t2: f64) -> Result<(f64, f64), HazardError> {
    let s = mixture_survival_checked(m, t1, t2)?;
    let (a1, a2) = m.comp0().survival_neg_gradient(t1, t2);
    let (b1, b2) = m.comp1().survival_neg_gradient(t1, t2);
    let p = m.p();
    Ok(((p * a1 + (1.0 - p) * b1) / s, (p * a2 + (1.0 - p) * b2) / s))
}

fn ln_cond_terms(c: &BvgeParams, x1: f64, x2: f64) -> (f64, f64) {
    // numerator ∂H/∂x₂ and denominator f₂(x₂), both as logs
    let lam = c.lambda();
    let [a1, a2, a3] = c.shapes();
    let den = c.marginal2().ln_pdf(x2);
    let num = if x1 < x2 {
        GeParams::new_unchecked(a1 + a3, lam).ln_cdf(x1) + GeParams::new_unchecked(a2, lam).ln_pdf(x2)
    } else {
        GeParams::new_unchecked(a1, lam).ln_cdf(x1) + den
    };
    (num, den)
}

/// `P(X₁ <= x₁ | X₂ = x₂)`.
///
/// Per component the numerator is `∂H/∂x₂`: `F(x₁; α₁+α₃) f(x₂; α₂)` below the
/// diagonal and `F(x₁; α₁) f(x₂; α₂+α₃)` on and above it. The jump of size
/// `α₃/(α₂+α₃) F(x₂; α₁)` at `x₁ = x₂` is the diagonal atom; the result is
/// right-continuous there.
pub fn conditional_cdf(m: &MixtureParams, x1: f64, x2: f64) -> f64 {
    if x1 <= 0.0 {
        return 0.0;
    }
    if x1 == f64::INFINITY {
        return 1.0;
    }
    let (n0, d0) = ln_cond_terms(m.comp0(), x1, x2);
    let (n1, d1) = ln_cond_terms(m.comp1(), x1, x2);
    let (lp, lq) = (m.p().ln(), (1.0 - m.p()).ln());
    let num = ln_add_exp(lp + n0, lq + n1);
    let den = ln_add_exp(lp + d0, lq + d1);
    clamp01((num - den).exp())
}

/// Published three-branch conditional CDF, each component evaluated at its
/// own rate. Returned with range diagnostics since the expression is not a
/// valid conditional CDF in general.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerbatimValue {
    pub value: f64,
    pub in_unit_interval: bool,
}

pub fn conditional_cdf_verbatim(m: &MixtureParams, x1: f64, x2: f64) -> VerbatimValue {
    let terms = |c: &BvgeParams| {
        let [a1, a2, a3] = c.shapes();
        let e1 = -(-c.lambda() * x1).exp_m1();
        let e2 = -(-c.lambda() * x2).exp_m1();
        let den = (a2 + a3) * e2.powf(a2 + a3 - 1.0);
        let num = if x1 < x2 {
            e1.powf(a1 + a3) * a2 * e2.powf(a2 - 1.0)
        } else if x1 > x2 {
            e1.powf(a1) * (a2 + a3) * e2.powf(a2 + a3 - 1.0)
        } else {
            let s = a1 + a2 + a3;
            s * e2.powf(s - 1.0)
        };
        (num, den)
    };
    let (n0, d0) = terms(m.comp0());
    let (n1, d1) = terms(m.comp1());
    let p = m.p();
    let value = (p * n0 + (1.0 - p) * n1) / (p * d0 + (1.0 - p) * d1);
    VerbatimValue { value, in_unit_interval: (0.0..=1.0).contains(&value) }
}

/// Published Kendall's τ expression.
pub fn kendall_tau_verbatim(m: &MixtureParams) -> f64 {
    let p = m.p();
    let q = 1.0 - p;
    let [a1, a2, a3] = m.comp0().shapes();
    let [b1, b2, b3] = m.comp1().shapes();
    let sa = a1 + a2 + a3;
    let sb = b1 + b2 + b3;
    p * p * (a1 + a2) / sa
        + q * q * (b1 + b2) / sb
        + 2.0 * p * q * b2 * (a2 + a3) / ((2.0 * b1 + b2 + 2.0 * b3) * (a2 + a3) + a2 * (b2 + b3))
        + 2.0 * p * q * a2 * (b2 + b3) / ((2.0 * a1 + a2 + 2.0 * a3) * (b2 + b3) + b2 * (a2 + a3))
        + 2.0 * p * q * b1 * (a1 + a3) / (2.0 * sb * a1 + (2.0 * b2 + b1 + b3) * a3)
        + 2.0 * p * q * a1 * (b1 + b3) / (2.0 * sa * b1 + (2.0 * a2 + a1 + a3) * b3)
        - 1.0
}

/// Published Spearman's ρ expression.
pub fn spearman_rho_verbatim(m: &MixtureParams) -> f64 {
    let [a1, a2, a3] = m.comp0().shapes();
    let [b1, b2, b3] = m.comp1().shapes();
    6.0 * m.p() * (a1 + a2) / (2.0 * (a1 + a2 + a3) + a3)
        + 6.0 * (1.0 - m.p()) * (b1 + b2) / (2.0 * (b1 + b2 + b3) + b3)
        - 3.0
}

const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_INTERVALS: usize = 200;

/// `E[φ(X₁, X₂)]` under one component.
///
/// Each region is mapped to the unit square by the probability integral
/// transforms of the densities that appear in it, e.g. below the diagonal
/// `s = F(x₁; α₁+α₃)` and `t = F(x₂; α₂)` with `t > s^{α₂/(α₁+α₃)}`, where
/// the transformed density is 1. The diagonal contributes
/// `α₃/(α₁+α₂+α₃) ∫ φ(x(s), x(s)) ds` with `s = F(x; α₁+α₂+α₃)`.
pub fn component_expectation<F: Fn(f64, f64) -> f64>(c: &BvgeParams, phi: F, tol: f64) -> Quad {
    let lam = c.lambda();
    let [a1, a2, a3] = c.shapes();
    let ge = |a: f64| GeParams::new_unchecked(a, lam);
    let mut err = 0.0;
    let mut ok = true;
    let mut off_diag = |outer: GeParams, inner: GeParams, expo: f64, lower: bool| {
        let q = integrate(
            |s| {
                let xo = outer.quantile_unchecked(s);
                let r = integrate(
                    |t| {
                        let xi = inner.quantile_unchecked(t);
                        if lower {
                            phi(xo, xi)
                        } else {
                            phi(xi, xo)
                        }
                    },
                    s.powf(expo),
                    1.0,
                    tol,
                    QUAD_MAX_INTERVALS,
                );
                r.value
            },
            0.0,
            1.0,
            tol,
            QUAD_MAX_INTERVALS,
        );
        err += q.abs_error;
        ok &= q.converged;
        q.value
    };
    let lower = off_diag(ge(a1 + a3), ge(a2), a2 / (a1 + a3), true);
    let upper = off_diag(ge(a2 + a3), ge(a1), a1 / (a2 + a3), false);
    let sum = ge(a1 + a2 + a3);
    let d = integrate(
        |s| {
            let x = sum.quantile_unchecked(s);
            phi(x, x)
        },
        0.0,
        1.0,
        tol,
        QUAD_MAX_INTERVALS,
    );
    let w = a3 / (a1 + a2 + a3);
    Quad { value: lower + upper + w * d.value, abs_error: err + w * d.abs_error, converged: ok && d.converged }
}

/// `E[φ(X₁, X₂)]` under the mixture.
pub fn mixture_expectation<F: Fn(f64, f64) -> f64>(m: &MixtureParams, phi: F, tol: f64) -> Quad {
    let q0 = component_expectation(m.comp0(), &phi, tol);
    let q1 = component_expectation(m.comp1(), &phi, tol);
    let p = m.p();
    Quad {
        value: p * q0.value + (1.0 - p) * q1.value,
        abs_error: p * q0.abs_error + (1.0 - p) * q1.abs_error,
        converged: q0.converged && q1.converged,
    }
}

/// A numeric dependence measure with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericValue {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

impl NumericValue {
    fn affine(q: Quad, scale: f64, shift: f64) -> Self {
        let value = (scale * q.value + shift).clamp(-1.0, 1.0);
        Self { value, abs_error: scale * q.abs_error, converged: q.converged }
    }
}

/// Kendall's τ = `4 E[C(U, V)] - 1` with `(U, V)` drawn from the copula.
///
/// For [`CopulaModel::Distribution`] this is `4 E[H(X₁, X₂)] - 1`. For the
/// component mixture `E[C(U, V)] = Σⱼ Σₖ wⱼ wₖ E_{Cⱼ}[Cₖ(U, V)]`.
pub fn kendall_tau_numeric(m: &MixtureParams, model: CopulaModel) -> NumericValue {
    let q = match model {
        CopulaModel::Distribution => mixture_expectation(m, |x1, x2| m.cdf(x1, x2), QUAD_TOL),
        CopulaModel::ComponentMixture => {
            let mut acc = Quad { value: 0.0, abs_error: 0.0, converged: true };
            for j in 0..2 {
                let cj = m.component(j);
                let (f1, f2) = (cj.marginal1(), cj.marginal2());
                let q = component_expectation(cj, |x1, x2| copula_mixture(m, f1.cdf(x1), f2.cdf(x2)), QUAD_TOL);
                acc.value += m.weight(j) * q.value;
                acc.abs_error += m.weight(j) * q.abs_error;
                acc.converged &= q.converged;
            }
            acc
        }
    };
    NumericValue::affine(q, 4.0, -1.0)
}

/// Spearman's ρ = `12 E[U V] - 3` with `(U, V)` drawn from the copula.
pub fn spearman_rho_numeric(m: &MixtureParams, model: CopulaModel) -> NumericValue {
    let q = match model {
        CopulaModel::Distribution => {
            mixture_expectation(m, |x1, x2| m.marginal_cdf(1, x1) * m.marginal_cdf(2, x2), QUAD_TOL)
        }
        CopulaModel::ComponentMixture => {
            let mut acc = Quad { value: 0.0, abs_error: 0.0, converged: true };
            for j in 0..2 {
                let cj = m.component(j);
                let (f1, f2) = (cj.marginal1(), cj.marginal2());
                let q = component_expectation(cj, |x1, x2| f1.cdf(x1) * f2.cdf(x2), QUAD_TOL);
                acc.value += m.weight(j) * q.value;
                acc.abs_error += m.weight(j) * q.abs_error;
                acc.converged &= q.converged;
            }
            acc
        }
    };
    NumericValue::affine(q, 12.0, -3.0)
}

/// A Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

/// Kendall's τ from `n_pairs` independent pairs of draws: the mean of
/// `sign((x₁ - x₁')(x₂ - x₂'))`. Ties score zero (tau-a).
pub fn kendall_tau_mc<R: Rng + ?Sized>(m: &MixtureParams, n_pairs: usize, rng: &mut R) -> McEstimate {
    let signs: Vec<f64> = (0..n_pairs)
        .map(|_| {
            let a = m.sample_one(rng).pair;
            let b = m.sample_one(rng).pair;
            ((a.x1 - b.x1) * (a.x2 - b.x2)).signum() * f64::from(a.x1 != b.x1 && a.x2 != b.x2)
        })
        .collect();
    mean_se(&signs)
}

fn mean_se(v: &[f64]) -> McEstimate {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    McEstimate { value: mean, se: (var / n).sqrt() }
}

/// Average ranks, 1-based.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Sample Spearman correlation of a set of pairs.
pub fn spearman_sample(pairs: &[(f64, f64)]) -> f64 {
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    pearson(&ranks(&x), &ranks(&y))
}

/// Spearman's ρ from `n` draws. The standard error comes from `batches`
/// equal batches of the same draws.
pub fn spearman_rho_mc<R: Rng + ?Sized>(m: &MixtureParams, n: usize, batches: usize, rng: &mut R) -> McEstimate {
    let pairs: Vec<(f64, f64)> = m.sample(n, rng).into_iter().map(|l| (l.pair.x1, l.pair.x2)).collect();
    let size = n / batches.max(2);
    let per_batch: Vec<f64> = pairs.chunks_exact(size).map(spearman_sample).collect();
    let spread = mean_se(&per_batch);
    McEstimate { value: spearman_sample(&pairs), se: spread.se }
}

/// All dependence measures of a mixture for one copula model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceSummary {
    pub model: CopulaModel,
    pub kendall_verbatim: f64,
    pub kendall_numeric: NumericValue,
    pub spearman_verbatim: f64,
    pub spearman_numeric: NumericValue,
    pub tail: TailIndices,
    /// The `*_verbatim` entries are published closed forms that have not been
    /// verified and can leave their mathematical range.
    pub verbatim_unverified: bool,
    pub verbatim_out_of_range: VerbatimRange,
}

/// Which published values lie outside their mathematical range (`[-1, 1]`
/// for the rank correlations, `[0, 1]` for the tail index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbatimRange {
    pub kendall: bool,
    pub spearman: bool,
    pub tail_upper: bool,
}

pub fn dependence_summary(m: &MixtureParams, model: CopulaModel) -> DependenceSummary {
    let kendall_verbatim = kendall_tau_verbatim(m);
    let spearman_verbatim = spearman_rho_verbatim(m);
    let tail = tail_indices(m, model);
    let unit = |v: f64| !(-1.0..=1.0).contains(&v);
    DependenceSummary {
        model,
        kendall_verbatim,
        kendall_numeric: kendall_tau_numeric(m, model),
        spearman_verbatim,
        spearman_numeric: spearman_rho_numeric(m, model),
        verbatim_out_of_range: VerbatimRange {
            kendall: unit(kendall_verbatim),
            spearman: unit(spearman_verbatim),
            tail_upper: !(0.0..=1.0).contains(&tail.upper_verbatim),
        },
        tail,
        verbatim_unverified: true,
    }
}
