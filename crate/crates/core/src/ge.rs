//! Univariate generalized exponential distribution `GE(α, λ)`.
//!
//! `F(x) = (1 - e^{-λx})^α` and `f(x) = αλ e^{-λx} (1 - e^{-λx})^{α-1}` for
//! `x > 0`. With `α = 1` this is the exponential distribution.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, ParamError};
use crate::math::ln1m_exp;

/// Shape `alpha` and rate `lambda` of a GE distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeParams {
    alpha: f64,
    lambda: f64,
}

impl GeParams {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self, ParamError> {
        Ok(Self { alpha: check_positive("alpha", alpha)?, lambda: check_positive("lambda", lambda)? })
    }

    /// Callers guarantee both values are positive and finite.
    pub(crate) fn new_unchecked(alpha: f64, lambda: f64) -> Self {
        debug_assert!(alpha > 0.0 && lambda > 0.0);
        Self { alpha, lambda }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `ln f(x)`. At `x = 0` this is `+inf` for `α < 1`, `ln λ` for `α = 1`
    /// and `-inf` for `α > 1`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        if x == 0.0 {
            return match self.alpha.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => self.lambda.ln(),
                _ => f64::NEG_INFINITY,
            };
        }
        if x == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        let z = self.lambda * x;
        let tail = if self.alpha == 1.0 { 0.0 } else { (self.alpha - 1.0) * ln1m_exp(z) };
        self.alpha.ln() + self.lambda.ln() - z + tail
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// `ln F(x)`; `-inf` for `x <= 0`.
    pub fn ln_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.alpha * ln1m_exp(self.lambda * x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.alpha == 1.0 {
            return -(-self.lambda * x).exp_m1();
        }
        self.ln_cdf(x).exp()
    }

    /// `1 - F(x)`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        -self.ln_cdf(x).exp_m1()
    }

    /// Inverse CDF, `x = -ln(1 - q^{1/α}) / λ`.
    pub fn quantile(&self, q: f64) -> Result<f64, ParamError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ParamError::ProbabilityOutOfRange(q));
        }
        Ok(self.quantile_unchecked(q))
    }

    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        let z = q.ln() / self.alpha; // ln q^{1/α}
        if z < -std::f64::consts::LN_2 {
            -(-z.exp()).ln_1p() / self.lambda
        } else {
            // 1 - q^{1/α} = -expm1(z)
            -(-z.exp_m1()).ln() / self.lambda
        }
    }

    /// Point with upper-tail probability `s`, i.e. `F(x) = 1 - s`, accurate for
    /// small `s`.
    pub fn quantile_upper(&self, s: f64) -> Result<f64, ParamError> {
        if !(s > 0.0 && s < 1.0) {
            return Err(ParamError::ProbabilityOutOfRange(s));
        }
        let g = (-s).ln_1p() / self.alpha; // ln(1 - e^{-λx})
        Ok(-(-g.exp_m1()).ln() / self.lambda)
    }

    /// Inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile_unchecked(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn ge(a: f64, l: f64) -> GeParams {
        GeParams::new(a, l).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GeParams::new(0.0, 1.0).is_err());
        assert!(GeParams::new(1.0, -1.0).is_err());
        assert!(GeParams::new(f64::NAN, 1.0).is_err());
        assert!(GeParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn pdf_examples() {
        assert!((ge(1.0, 1.0).pdf(LN_2) - 0.5).abs() < 1e-15);
        assert_eq!(ge(2.0, 1.0).pdf(0.0), 0.0);
        assert_eq!(ge(0.5, 1.0).pdf(0.0), f64::INFINITY);
        assert_eq!(ge(2.0, 1.0).pdf(-1.0), 0.0);
        let d = ge(1.2, 0.5);
        let h = 1e-5;
        let fd = (d.cdf(1.0 + h) - d.cdf(1.0 - h)) / (2.0 * h);
        assert!((d.pdf(1.0) - fd).abs() < 1e-6);
    }

    #[test]
    fn cdf_examples() {
        assert!((ge(2.0, 1.0).cdf(LN_2) - 0.25).abs() < 1e-15);
        assert_eq!(ge(1.0, 2.0).cdf(0.0), 0.0);
        let want = (1.0 - (-5.0f64).exp()).powi(3);
        assert!((ge(3.0, 1.0).cdf(5.0) - want).abs() < 1e-15);
        assert_eq!(ge(1.0, 1.0).cdf(-3.0), 0.0);
    }

    #[test]
    fn exponential_special_case_is_exact() {
        for &x in &[0.01f64, 0.3, 1.0, 7.5] {
            for &l in &[0.5, 1.0, 2.0] {
                assert_eq!(ge(1.0, l).cdf(x), -(-l * x).exp_m1());
                assert!((ge(1.0, l).cdf(x) - (1.0 - (-l * x).exp())).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quantile_examples() {
        assert!((ge(2.0, 1.0).quantile(0.25).unwrap() - LN_2).abs() < 1e-15);
        let q = 1.0 - (-1.0f64).exp();
        assert!((ge(1.0, 1.0).quantile(q).unwrap() - 1.0).abs() < 1e-14);
        let d = ge(0.5, 2.0);
        assert!((d.cdf(d.quantile(0.9).unwrap()) - 0.9).abs() < 1e-12);
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(f64::NAN).is_err());
        // q^{1/α} = 1e-30 is far below the spacing of doubles near 1
        let tiny = ge(0.1, 0.1);
        assert!((tiny.cdf(tiny.quantile(1e-3).unwrap()) / 1e-3 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn upper_quantile_matches_survival() {
        let d = ge(2.5, 0.7);
        for &s in &[0.5, 1e-3, 1e-9, 1e-14] {
            let x = d.quantile_upper(s).unwrap();
            assert!((d.sf(x) / s - 1.0).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn quantile_inverts_cdf_on_grid() {
        for &(a, l) in &[(0.3, 0.5), (1.0, 1.0), (2.5, 2.0)] {
            let d = ge(a, l);
            let mut x = 0.01;
            while x <= 20.0 {
                let q = d.cdf(x);
                if q < 1.0 {
                    let back = d.quantile(q).unwrap();
                    assert!((back - x).abs() < 1e-10 * x.max(1.0) || (d.cdf(back) - q).abs() < 1e-15, "a={a} x={x}");
                }
                x *= 1.3;
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = ge(1.7, 0.4);
        let a: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..20).map(|_| d.sample(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..20).map(|_| d.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
    }
}
