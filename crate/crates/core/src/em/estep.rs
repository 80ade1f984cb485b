//! Stage one (component labels) and stage two (latent orderings) of the E-step.

use serde::{Deserialize, Serialize};

use crate::bvge::{BvgePair, BvgeParams, Region};
use crate::em::partition::DataPartition;
use crate::math::{ln_add_exp, ratio_first};
use crate::mixture::MixtureParams;

/// Responsibilities of component 0 for each observation, per region. The
/// component 1 responsibility is the complement.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Posteriors {
    pub diag: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Posteriors {
    /// Every observation gets the same responsibility `r` for component 0.
    pub fn constant(part: &DataPartition, r: f64) -> Self {
        Self { diag: vec![r; part.n0()], lower: vec![r; part.n1()], upper: vec![r; part.n2()] }
    }

    /// Responsibilities of `component` (0 or 1), materialized.
    pub fn for_component(&self, component: usize) -> ComponentWeights {
        let map = |v: &Vec<f64>| -> Vec<f64> {
            if component == 0 {
                v.clone()
            } else {
                v.iter().map(|r| 1.0 - r).collect()
            }
        };
        ComponentWeights { diag: map(&self.diag), lower: map(&self.lower), upper: map(&self.upper) }
    }

    pub fn total(&self) -> f64 {
        self.diag.iter().chain(&self.lower).chain(&self.upper).sum()
    }
}

/// Per-observation weights of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentWeights {
    pub diag: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Conditional probabilities of the latent ordering indicators of one
/// component.
///
/// On `x₁ < x₂`, `u1` is the probability that `X₁` came from `U₁` and `u2`
/// that it came from `U₃`. On `x₁ > x₂`, `w1`/`w2` play the same role for `X₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentMasses {
    pub u1: f64,
    pub u2: f64,
    pub w1: f64,
    pub w2: f64,
}

impl LatentMasses {
    pub fn from_params(c: &BvgeParams) -> Self {
        let [a1, a2, a3] = c.shapes();
        let u1 = a1 / (a1 + a3);
        let w1 = a2 / (a2 + a3);
        Self { u1, u2: a3 / (a1 + a3), w1, w2: a3 / (a2 + a3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalMasses {
    pub comp: [LatentMasses; 2],
}

impl FractionalMasses {
    pub fn from_params(params: &MixtureParams) -> Self {
        Self { comp: [LatentMasses::from_params(params.comp0()), LatentMasses::from_params(params.comp1())] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    pub posteriors: Posteriors,
    pub masses: FractionalMasses,
    /// Observed-data log-likelihood at the parameters used.
    pub loglik: f64,
    /// Points where both component densities vanished; their responsibility
    /// was set to 1/2.
    pub degenerate_points: usize,
}

/// Compute responsibilities in log space and the fractional masses from the
/// current shapes.
pub fn e_step(params: &MixtureParams, part: &DataPartition) -> EStep {
    let mut degenerate_points = 0;
    let mut loglik = 0.0;
    let mut resp = |pair: BvgePair| -> f64 {
        let [a, b] = params.ln_joint_terms(&pair);
        loglik += ln_add_exp(a, b);
        match ratio_first(a, b) {
            Some(r) => r,
            None => {
                degenerate_points += 1;
                0.5
            }
        }
    };
    let diag = part.diag.iter().map(|d| resp(BvgePair { x1: d.y, x2: d.y, region: Region::Diagonal })).collect();
    let lower = part.lower.iter().map(|o| resp(BvgePair { x1: o.x1, x2: o.x2, region: Region::Lower })).collect();
    let upper = part.upper.iter().map(|o| resp(BvgePair { x1: o.x1, x2: o.x2, region: Region::Upper })).collect();
    EStep {
        posteriors: Posteriors { diag, lower, upper },
        masses: FractionalMasses::from_params(params),
        loglik,
        degenerate_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::partition::partition_data;

    fn xi2() -> MixtureParams {
        MixtureParams::from_array([0.3, 1.0, 1.2, 1.0, 1.0, 1.0, 1.4, 2.0, 0.5]).unwrap()
    }

    #[test]
    fn identical_components_give_prior_weight() {
        let c = BvgeParams::new(0.8, 1.3, 0.5, 1.1).unwrap();
        let m = MixtureParams::new(0.37, c, c).unwrap();
        let part = partition_data(&[(0.4, 0.4), (0.2, 1.5), (3.0, 0.1)], 0.0).unwrap();
        let e = e_step(&m, &part);
        for r in e.posteriors.diag.iter().chain(&e.posteriors.lower).chain(&e.posteriors.upper) {
            assert!((r - 0.37).abs() < 1e-15);
        }
    }

    #[test]
    fn masses_follow_shape_ratios() {
        let c = BvgeParams::new(0.7, 0.2, 0.7, 1.0).unwrap();
        let m = LatentMasses::from_params(&c);
        assert_eq!((m.u1, m.u2), (0.5, 0.5));
        assert_eq!(m.w1 + m.w2, 1.0);
    }

    #[test]
    fn well_separated_point_is_assigned_confidently() {
        // component 0 has rate 1, component 1 rate 0.5 and a heavy diagonal;
        // a small off-diagonal point is much likelier under component 0
        let m = MixtureParams::from_array([0.3, 1.0, 1.2, 1.0, 4.0, 1.0, 1.4, 2.0, 0.2]).unwrap();
        let part = partition_data(&[(0.15, 0.3)], 0.0).unwrap();
        let e = e_step(&m, &part);
        let direct = {
            let pair = BvgePair::new(0.15, 0.3, 0.0);
            let a = 0.3 * m.comp0().density(&pair).value();
            let b = 0.7 * m.comp1().density(&pair).value();
            a / (a + b)
        };
        assert!(e.posteriors.lower[0] > 0.99);
        assert!((e.posteriors.lower[0] - direct).abs() < 1e-14);
    }

    #[test]
    fn loglik_matches_mixture() {
        let m = xi2();
        let data = [(0.4, 0.4), (0.2, 1.5), (3.0, 0.1)];
        let part = partition_data(&data, 0.0).unwrap();
        let e = e_step(&m, &part);
        let direct = m.loglik(&part.pairs()).unwrap();
        assert!((e.loglik - direct).abs() < 1e-12);
        assert_eq!(e.degenerate_points, 0);
    }
}
