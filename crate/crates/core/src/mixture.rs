//! The two-component mixture `p·BVGE(α₁, α₂, α₃, λ₁) + (1-p)·BVGE(β₁, β₂, β₃, λ₂)`.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvge::{BvgePair, BvgeParams, Density, Region};
use crate::error::ParamError;
use crate::math::{bisect_increasing, ln_add_exp};

/// Weight `p` of component 0 and the two components. Component 0 carries
/// `(α, λ₁)`, component 1 carries `(β, λ₂)`.
///
/// Serialized as the flat object `{"p", "a1", "a2", "a3", "l1", "b1", "b2",
/// "b3", "l2"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatParams", into = "FlatParams")]
pub struct MixtureParams {
    p: f64,
    comp0: BvgeParams,
    comp1: BvgeParams,
}

/// A draw and the index of the component that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPair {
    pub pair: BvgePair,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LikelihoodError {
    #[error("empty data set")]
    Empty,
    #[error("observation {index} has zero density under both components")]
    ZeroDensity { index: usize },
}

/// The nine parameters as named fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatParams {
    pub p: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub l1: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub l2: f64,
}

impl FlatParams {
    pub fn to_array(&self) -> [f64; 9] {
        [self.p, self.a1, self.a2, self.a3, self.l1, self.b1, self.b2, self.b3, self.l2]
    }

    pub fn from_array(v: [f64; 9]) -> Self {
        let [p, a1, a2, a3, l1, b1, b2, b3, l2] = v;
        Self { p, a1, a2, a3, l1, b1, b2, b3, l2 }
    }
}

impl TryFrom<FlatParams> for MixtureParams {
    type Error = ParamError;
    fn try_from(f: FlatParams) -> Result<Self, ParamError> {
        MixtureParams::from_array(f.to_array())
    }
}

impl From<MixtureParams> for FlatParams {
    fn from(m: MixtureParams) -> Self {
        FlatParams::from_array(m.to_array())
    }
}

/// Names of the nine parameters in reporting order.
pub const PARAM_NAMES: [&str; 9] = ["p", "a1", "a2", "a3", "l1", "b1", "b2", "b3", "l2"];

impl MixtureParams {
    pub fn new(p: f64, comp0: BvgeParams, comp1: BvgeParams) -> Result<Self, ParamError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ParamError::WeightOutOfRange(p));
        }
        Ok(Self { p, comp0, comp1 })
    }

    /// Allows `p` anywhere in `[0, 1]`; the EM iteration may touch the boundary.
    pub(crate) fn new_relaxed(p: f64, comp0: BvgeParams, comp1: BvgeParams) -> Self {
        debug_assert!((0.0..=1.0).contains(&p));
        Self { p, comp0, comp1 }
    }

    /// Build from the flat vector `[p, α₁, α₂, α₃, λ₁, β₁, β₂, β₃, λ₂]`.
    pub fn from_array(v: [f64; 9]) -> Result<Self, ParamError> {
        let comp0 = BvgeParams::new(v[1], v[2], v[3], v[4])?;
        let comp1 = BvgeParams::new(v[5], v[6], v[7], v[8])?;
        Self::new(v[0], comp0, comp1)
    }

    pub fn to_array(&self) -> [f64; 9] {
        let (a, b) = (self.comp0, self.comp1);
        [self.p, a.alpha1(), a.alpha2(), a.alpha3(), a.lambda(), b.alpha1(), b.alpha2(), b.alpha3(), b.lambda()]
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn comp0(&self) -> &BvgeParams {
        &self.comp0
    }
    pub fn comp1(&self) -> &BvgeParams {
        &self.comp1
    }
    pub fn component(&self, k: usize) -> &BvgeParams {
        if k == 0 {
            &self.comp0
        } else {
            &self.comp1
        }
    }

    /// Weight of component `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 {
            self.p
        } else {
            1.0 - self.p
        }
    }

    /// Relabel: component 1 becomes component 0 and `p` becomes `1 - p`.
    pub fn swapped_components(&self) -> Self {
        Self { p: 1.0 - self.p, comp0: self.comp1, comp1: self.comp0 }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledPair {
        let u: f64 = rng.gen();
        let label = if u < self.p { 0 } else { 1 };
        LabeledPair { pair: self.component(label as usize).sample(rng), label }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<LabeledPair> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// `n` draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Vec<LabeledPair> {
        self.sample(n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    }

    /// Per-component `ln(weight · density)` in the pair's channel.
    pub fn ln_joint_terms(&self, pair: &BvgePair) -> [f64; 2] {
        [self.p.ln() + self.comp0.ln_density(pair), (1.0 - self.p).ln() + self.comp1.ln_density(pair)]
    }

    pub fn ln_density(&self, pair: &BvgePair) -> f64 {
        let [a, b] = self.ln_joint_terms(pair);
        ln_add_exp(a, b)
    }

    pub fn density(&self, pair: &BvgePair) -> Density {
        let v = self.ln_density(pair).exp();
        match pair.region {
            Region::Diagonal => Density::Diagonal(v),
            _ => Density::Planar(v),
        }
    }

    /// Joint CDF.
    pub fn cdf(&self, x1: f64, x2: f64) -> f64 {
        self.p * self.comp0.cdf(x1, x2) + (1.0 - self.p) * self.comp1.cdf(x1, x2)
    }

    /// Joint survival `P(X₁ > t₁, X₂ > t₂)`.
    pub fn survival(&self, t1: f64, t2: f64) -> f64 {
        self.p * self.comp0.survival(t1, t2) + (1.0 - self.p) * self.comp1.survival(t1, t2)
    }

    /// Marginal CDF of coordinate `coord` (1 or 2): a two-term GE mixture.
    pub fn marginal_cdf(&self, coord: u8, x: f64) -> f64 {
        let (a, b) = self.marginals(coord);
        self.p * a.cdf(x) + (1.0 - self.p) * b.cdf(x)
    }

    /// Marginal survival of coordinate `coord`.
    pub fn marginal_sf(&self, coord: u8, x: f64) -> f64 {
        let (a, b) = self.marginals(coord);
        self.p * a.sf(x) + (1.0 - self.p) * b.sf(x)
    }

    /// Marginal density of coordinate `coord`.
    pub fn marginal_pdf(&self, coord: u8, x: f64) -> f64 {
        let (a, b) = self.marginals(coord);
        self.p * a.pdf(x) + (1.0 - self.p) * b.pdf(x)
    }

    fn marginals(&self, coord: u8) -> (crate::GeParams, crate::GeParams) {
        match coord {
            1 => (self.comp0.marginal1(), self.comp1.marginal1()),
            2 => (self.comp0.marginal2(), self.comp1.marginal2()),
            _ => panic!("coordinate must be 1 or 2, got {coord}"),
        }
    }

    /// Marginal quantile by bisection. The root lies between the two component
    /// quantiles.
    pub fn marginal_quantile(&self, coord: u8, q: f64) -> Result<f64, ParamError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ParamError::ProbabilityOutOfRange(q));
        }
        let (a, b) = self.marginals(coord);
        let (qa, qb) = (a.quantile_unchecked(q), b.quantile_unchecked(q));
        let (lo, hi) = if qa <= qb { (qa, qb) } else { (qb, qa) };
        if lo == hi {
            return Ok(lo);
        }
        Ok(bisect_increasing(|x| self.marginal_cdf(coord, x) - q, lo, hi))
    }

    /// Point with marginal upper-tail probability `s`, accurate for small `s`.
    pub fn marginal_quantile_upper(&self, coord: u8, s: f64) -> Result<f64, ParamError> {
        if !(s > 0.0 && s < 1.0) {
            return Err(ParamError::ProbabilityOutOfRange(s));
        }
        let (a, b) = self.marginals(coord);
        let (qa, qb) = (a.quantile_upper(s)?, b.quantile_upper(s)?);
        let (lo, hi) = if qa <= qb { (qa, qb) } else { (qb, qa) };
        if lo == hi {
            return Ok(lo);
        }
        Ok(bisect_increasing(|x| s - self.marginal_sf(coord, x), lo, hi))
    }

    /// `P(X₁ = X₂)`.
    pub fn singular_mass(&self) -> f64 {
        self.p * self.comp0.singular_mass() + (1.0 - self.p) * self.comp1.singular_mass()
    }

    /// Observed-data log-likelihood `Σ ln f(xᵢ)`, diagonal points in the
    /// diagonal channel.
    pub fn loglik(&self, data: &[BvgePair]) -> Result<f64, LikelihoodError> {
        if data.is_empty() {
            return Err(LikelihoodError::Empty);
        }
        let mut total = 0.0;
        for (index, pair) in data.iter().enumerate() {
            let v = self.ln_density(pair);
            if v == f64::NEG_INFINITY {
                return Err(LikelihoodError::ZeroDensity { index });
            }
            total += v;
        }
        Ok(total)
    }
}
