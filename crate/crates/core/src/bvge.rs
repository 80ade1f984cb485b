//! One bivariate generalized exponential component `BVGE(α₁, α₂, α₃, λ)`.
//!
//! With independent `Uᵢ ~ GE(αᵢ, λ)`, the pair `X₁ = max(U₁, U₃)`,
//! `X₂ = max(U₂, U₃)` has an absolutely continuous part on each side of the
//! diagonal and a singular part on `x₁ = x₂` of mass `α₃ / (α₁ + α₂ + α₃)`.
//!
//! Densities on the two sides are with respect to area; the diagonal density
//! is with respect to length along the diagonal. [`Density`] keeps the two
//! channels apart.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, ParamError};
use crate::ge::GeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvgeParams {
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    lambda: f64,
}

/// Which part of the support an observation falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// `x₁ = x₂`
    #[serde(rename = "diag")]
    Diagonal,
    /// `x₁ < x₂`
    Lower,
    /// `x₁ > x₂`
    Upper,
}

impl Region {
    /// Classify a pair. Ties are `|x₁ - x₂| <= tie_tol * max(1, |x₁|)`; with
    /// `tie_tol = 0` only exact equality counts.
    pub fn classify(x1: f64, x2: f64, tie_tol: f64) -> Region {
        if x1 == x2 || (x1 - x2).abs() <= tie_tol * x1.abs().max(1.0) {
            Region::Diagonal
        } else if x1 < x2 {
            Region::Lower
        } else {
            Region::Upper
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Diagonal => "diag",
            Region::Lower => "lower",
            Region::Upper => "upper",
        }
    }
}

impl std::str::FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diag" => Ok(Region::Diagonal),
            "lower" => Ok(Region::Lower),
            "upper" => Ok(Region::Upper),
            other => Err(format!("unknown region {other:?}")),
        }
    }
}

/// An observation together with its region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvgePair {
    pub x1: f64,
    pub x2: f64,
    pub region: Region,
}

impl BvgePair {
    pub fn new(x1: f64, x2: f64, tie_tol: f64) -> Self {
        Self { x1, x2, region: Region::classify(x1, x2, tie_tol) }
    }

    /// The common coordinate of a diagonal observation.
    pub fn diagonal_value(&self) -> f64 {
        self.x1
    }
}

/// A density value tagged with its reference measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    /// With respect to area, off the diagonal.
    Planar(f64),
    /// With respect to length, on the diagonal.
    Diagonal(f64),
}

impl Density {
    pub fn value(&self) -> f64 {
        match *self {
            Density::Planar(v) | Density::Diagonal(v) => v,
        }
    }
}

impl BvgeParams {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64, lambda: f64) -> Result<Self, ParamError> {
        Ok(Self {
            alpha1: check_positive("alpha1", alpha1)?,
            alpha2: check_positive("alpha2", alpha2)?,
            alpha3: check_positive("alpha3", alpha3)?,
            lambda: check_positive("lambda", lambda)?,
        })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
    pub fn alpha3(&self) -> f64 {
        self.alpha3
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn shapes(&self) -> [f64; 3] {
        [self.alpha1, self.alpha2, self.alpha3]
    }
    pub fn shape_sum(&self) -> f64 {
        self.alpha1 + self.alpha2 + self.alpha3
    }

    /// Same shapes, different rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self, ParamError> {
        Self::new(self.alpha1, self.alpha2, self.alpha3, lambda)
    }

    /// Exchange the roles of the two coordinates.
    pub fn swapped(&self) -> Self {
        Self { alpha1: self.alpha2, alpha2: self.alpha1, ..*self }
    }

    fn ge(&self, shape: f64) -> GeParams {
        GeParams::new_unchecked(shape, self.lambda)
    }

    /// Marginal law of `X₁`, `GE(α₁ + α₃, λ)`.
    pub fn marginal1(&self) -> GeParams {
        self.ge(self.alpha1 + self.alpha3)
    }

    /// Marginal law of `X₂`, `GE(α₂ + α₃, λ)`.
    pub fn marginal2(&self) -> GeParams {
        self.ge(self.alpha2 + self.alpha3)
    }

    /// `P(X₁ = X₂) = α₃ / (α₁ + α₂ + α₃)`.
    pub fn singular_mass(&self) -> f64 {
        self.alpha3 / self.shape_sum()
    }

    /// Draw one pair through the latent max construction. Diagonal draws have
    /// bit-identical coordinates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BvgePair {
        let u1 = self.ge(self.alpha1).sample(rng);
        let u2 = self.ge(self.alpha2).sample(rng);
        let u3 = self.ge(self.alpha3).sample(rng);
        let x1 = u1.max(u3);
        let x2 = u2.max(u3);
        BvgePair { x1, x2, region: Region::classify(x1, x2, 0.0) }
    }

    /// Log density in the channel of the pair's region.
    ///
    /// * lower (`x₁ < x₂`): `f_GE(x₁; α₁+α₃) f_GE(x₂; α₂)`
    /// * upper (`x₁ > x₂`): `f_GE(x₁; α₁) f_GE(x₂; α₂+α₃)`
    /// * diagonal: `α₃/(α₁+α₂+α₃) f_GE(x; α₁+α₂+α₃)`
    pub fn ln_density(&self, pair: &BvgePair) -> f64 {
        match pair.region {
            Region::Lower => self.ge(self.alpha1 + self.alpha3).ln_pdf(pair.x1) + self.ge(self.alpha2).ln_pdf(pair.x2),
            Region::Upper => self.ge(self.alpha1).ln_pdf(pair.x1) + self.ge(self.alpha2 + self.alpha3).ln_pdf(pair.x2),
            Region::Diagonal => {
                let s = self.shape_sum();
                (self.alpha3 / s).ln() + self.ge(s).ln_pdf(pair.diagonal_value())
            }
        }
    }

    pub fn density(&self, pair: &BvgePair) -> Density {
        let v = self.ln_density(pair).exp();
        match pair.region {
            Region::Diagonal => Density::Diagonal(v),
            _ => Density::Planar(v),
        }
    }

    /// Joint CDF `P(X₁ <= x₁, X₂ <= x₂)`.
    pub fn cdf(&self, x1: f64, x2: f64) -> f64 {
        if x1 <= 0.0 || x2 <= 0.0 {
            return 0.0;
        }
        if x1 < x2 {
            self.ge(self.alpha1 + self.alpha3).cdf(x1) * self.ge(self.alpha2).cdf(x2)
        } else if x1 > x2 {
            self.ge(self.alpha1).cdf(x1) * self.ge(self.alpha2 + self.alpha3).cdf(x2)
        } else {
            self.ge(self.shape_sum()).cdf(x1)
        }
    }

    /// Joint survival `P(X₁ > t₁, X₂ > t₂)`.
    ///
    /// Equal to `1 - F₁(t₁) - F₂(t₂) + F(t₁, t₂)`, rearranged into a sum of
    /// non-negative terms so that it stays accurate deep in the upper tail.
    pub fn survival(&self, t1: f64, t2: f64) -> f64 {
        if t1 <= t2 {
            // (1 - F₁(t₁))(1 - G₂(t₂)) + G₂(t₂)(1 - G₃(t₂))
            let g2 = self.ge(self.alpha2);
            self.marginal1().sf(t1) * g2.sf(t2) + g2.cdf(t2) * self.ge(self.alpha3).sf(t2)
        } else {
            let g1 = self.ge(self.alpha1);
            self.marginal2().sf(t2) * g1.sf(t1) + g1.cdf(t1) * self.ge(self.alpha3).sf(t1)
        }
    }

    /// `(-∂S/∂t₁, -∂S/∂t₂)` of the joint survival. On the diagonal the
    /// one-sided derivative in the direction of increasing argument is used.
    pub(crate) fn survival_neg_gradient(&self, t1: f64, t2: f64) -> (f64, f64) {
        (self.survival_neg_partial_first(t1, t2), self.swapped().survival_neg_partial_first(t2, t1))
    }

    fn survival_neg_partial_first(&self, t1: f64, t2: f64) -> f64 {
        let g1 = self.ge(self.alpha1);
        let g3 = self.ge(self.alpha3);
        if t1 < t2 {
            // f₁₃(t₁)(1 - G₂(t₂))
            self.marginal1().pdf(t1) * self.ge(self.alpha2).sf(t2)
        } else {
            // f₁(t₁)(G₃(t₁) - G₂₃(t₂)) + G₁(t₁) f₃(t₁)
            g1.pdf(t1) * (g3.cdf(t1) - self.marginal2().cdf(t2)).max(0.0) + g1.cdf(t1) * g3.pdf(t1)
        }
    }
}
