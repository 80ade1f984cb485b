//! The expected complete-data log-likelihood maximized by the M-step.

use crate::em::estep::{FractionalMasses, Posteriors};
use crate::em::mstep::component_q;
use crate::em::partition::DataPartition;
use crate::mixture::MixtureParams;

/// Responsibilities are floored here before taking logs of the weight.
const RESP_FLOOR: f64 = 1e-300;

/// `Σ rᵢ ln p + Σ (1-rᵢ) ln(1-p)` plus, per component, the responsibility-
/// and mass-weighted complete-data log densities over `I₀`, `I₁` and `I₂`.
///
/// Posteriors and masses are held fixed, so the shape, rate and weight
/// updates of the M-step are its stationary points.
pub fn pseudo_loglik(
    params: &MixtureParams,
    post: &Posteriors,
    masses: &FractionalMasses,
    part: &DataPartition,
) -> f64 {
    let r0 = post.total();
    let r1 = part.len() as f64 - r0;
    let weight_term = |r: f64, q: f64| if r <= RESP_FLOOR { 0.0 } else { r * q.ln() };
    let mut q = weight_term(r0, params.p()) + weight_term(r1, 1.0 - params.p());
    for k in 0..2 {
        let c = params.component(k);
        q += component_q(part, &post.for_component(k), &masses.comp[k], c.shapes(), c.lambda());
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::estep::e_step;
    use crate::em::partition::partition_data;
    use crate::em::{m_step, EmConfig, MStepStats};
    use rand::SeedableRng;

    fn setup() -> (MixtureParams, DataPartition) {
        let truth = MixtureParams::from_array([0.3, 1.0, 1.2, 1.0, 1.0, 1.0, 1.4, 2.0, 0.5]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<_> = truth.sample(200, &mut rng).into_iter().map(|l| (l.pair.x1, l.pair.x2)).collect();
        (truth, partition_data(&data, 0.0).unwrap())
    }

    #[test]
    fn m_step_is_stationary() {
        let (truth, part) = setup();
        let start = MixtureParams::from_array([0.5, 0.8, 0.9, 0.6, 0.8, 1.3, 1.0, 1.1, 0.7]).unwrap();
        let e = e_step(&start, &part);
        let mut stats = MStepStats::default();
        let next = m_step(&start, &e, &part, &EmConfig::default(), &mut stats);
        assert_eq!(stats.rejected_rate_steps, 0);
        let v = next.to_array();
        let f = |v: [f64; 9]| pseudo_loglik(&MixtureParams::from_array(v).unwrap(), &e.posteriors, &e.masses, &part);
        for k in 0..9 {
            let h = 1e-5 * v[k];
            let (mut up, mut dn) = (v, v);
            up[k] += h;
            dn[k] -= h;
            // derivative in log scale, relative to the number of observations
            let g = (f(up) - f(dn)) / (2.0 * h) * v[k] / part.len() as f64;
            assert!(g.abs() < 1e-6, "param {k}: {g}");
        }
        let _ = truth;
    }

    #[test]
    fn m_step_increases_pseudo_loglik() {
        let (_, part) = setup();
        let start = MixtureParams::from_array([0.5, 0.8, 0.9, 0.6, 0.8, 1.3, 1.0, 1.1, 0.7]).unwrap();
        let e = e_step(&start, &part);
        let next = m_step(&start, &e, &part, &EmConfig::default(), &mut MStepStats::default());
        let q0 = pseudo_loglik(&start, &e.posteriors, &e.masses, &part);
        let q1 = pseudo_loglik(&next, &e.posteriors, &e.masses, &part);
        assert!(q1 > q0);
    }
}
