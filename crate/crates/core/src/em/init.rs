//! Starting values for the EM iteration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvge::BvgeParams;
use crate::em::partition::DataPartition;
use crate::math::{bisect_increasing, digamma, trigamma};
use crate::mixture::MixtureParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Shapes log-uniform on `[0.2, 3]`, rates log-uniform on `[0.3, 3]`,
    /// `p` uniform on `[0.2, 0.8]`.
    Random,
    /// Two-means clustering of the pairs followed by marginal moment matching
    /// within each cluster.
    Moment,
}

pub fn initial_params(part: &DataPartition, strategy: InitStrategy, seed: u64) -> MixtureParams {
    match strategy {
        InitStrategy::Random => random_params(&mut ChaCha8Rng::seed_from_u64(seed)),
        InitStrategy::Moment => moment_params(part),
    }
}

pub fn random_params<R: Rng + ?Sized>(rng: &mut R) -> MixtureParams {
    let mut log_uniform = |lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    let mut comp = || {
        let a1 = log_uniform(0.2, 3.0);
        let a2 = log_uniform(0.2, 3.0);
        let a3 = log_uniform(0.2, 3.0);
        let l = log_uniform(0.3, 3.0);
        BvgeParams::new(a1, a2, a3, l).expect("ranges are positive")
    };
    let c0 = comp();
    let c1 = comp();
    let p = rng.gen_range(0.2..0.8);
    MixtureParams::new(p, c0, c1).expect("p in (0.2, 0.8)")
}

/// Shape `α` and rate `λ` of the GE law with the given mean and variance.
///
/// The squared coefficient of variation `(ψ'(1) - ψ'(α+1)) / (ψ(α+1) - ψ(1))²`
/// decreases in `α`, so `α` is found by bisection on the log scale.
pub fn ge_moment_match(mean: f64, var: f64) -> Option<(f64, f64)> {
    if !(mean > 0.0 && var > 0.0 && mean.is_finite() && var.is_finite()) {
        return None;
    }
    let cv2 = var / (mean * mean);
    let cv2_at = |a: f64| (trigamma(1.0) - trigamma(a + 1.0)) / (digamma(a + 1.0) - digamma(1.0)).powi(2);
    let (lo, hi) = (1e-3f64, 1e3f64);
    let target = cv2.clamp(cv2_at(hi), cv2_at(lo));
    // increasing in ln α after negation
    let t = bisect_increasing(|t: f64| target - cv2_at(t.exp()), lo.ln(), hi.ln());
    let a = t.exp();
    let lambda = (digamma(a + 1.0) - digamma(1.0)) / mean;
    Some((a, lambda))
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, s)
}

/// Component estimate from one cluster: marginal shapes `s₁ = α₁+α₃` and
/// `s₂ = α₂+α₃`, the common rate as the average of the two marginal rates and
/// `α₃` from the tie fraction `t = α₃ / (α₁+α₂+α₃)`.
fn cluster_component(points: &[(f64, f64, bool)]) -> Option<BvgeParams> {
    if points.len() < 3 {
        return None;
    }
    let x1: Vec<f64> = points.iter().map(|p| p.0).collect();
    let x2: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (m1, v1) = mean_var(&x1);
    let (m2, v2) = mean_var(&x2);
    let (s1, l1) = ge_moment_match(m1, v1)?;
    let (s2, l2) = ge_moment_match(m2, v2)?;
    let t = points.iter().filter(|p| p.2).count() as f64 / points.len() as f64;
    let smin = s1.min(s2);
    let a3 = (t * (s1 + s2) / (1.0 + t)).clamp(0.05 * smin, 0.9 * smin);
    BvgeParams::new(s1 - a3, s2 - a3, a3, 0.5 * (l1 + l2)).ok()
}

/// Deterministic two-means on `(x₁, x₂)`, started from the pairs with the
/// smallest and largest coordinate sum.
fn two_means(points: &[(f64, f64, bool)]) -> Vec<bool> {
    let key = |p: &(f64, f64, bool)| p.0 + p.1;
    let lo = points.iter().copied().min_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
    let hi = points.iter().copied().max_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
    let mut centers = [(lo.0, lo.1), (hi.0, hi.1)];
    let mut assign = vec![false; points.len()];
    for _ in 0..100 {
        let d = |p: &(f64, f64, bool), c: (f64, f64)| (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2);
        let next: Vec<bool> = points.iter().map(|p| d(p, centers[1]) < d(p, centers[0])).collect();
        let changed = next != assign;
        assign = next;
        for (k, c) in centers.iter_mut().enumerate() {
            let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
            for (p, &a) in points.iter().zip(&assign) {
                if a == (k == 1) {
                    sx += p.0;
                    sy += p.1;
                    n += 1.0;
                }
            }
            if n > 0.0 {
                *c = (sx / n, sy / n);
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

pub fn moment_params(part: &DataPartition) -> MixtureParams {
    let points: Vec<(f64, f64, bool)> = part
        .diag
        .iter()
        .map(|d| (d.y, d.y, true))
        .chain(part.lower.iter().chain(&part.upper).map(|o| (o.x1, o.x2, false)))
        .collect();
    let fallback = || {
        let c = cluster_component(&points).unwrap_or_else(|| BvgeParams::new(1.0, 1.0, 1.0, 1.0).unwrap());
        // break the symmetry so the components can separate
        let c1 = c.with_lambda(c.lambda() * 0.7).unwrap();
        MixtureParams::new(0.5, c, c1).unwrap()
    };
    if points.len() < 6 {
        return fallback();
    }
    let assign = two_means(&points);
    let groups: [Vec<_>; 2] =
        std::array::from_fn(|k| points.iter().zip(&assign).filter(|(_, &a)| a == (k == 1)).map(|(p, _)| *p).collect());
    match (cluster_component(&groups[0]), cluster_component(&groups[1])) {
        (Some(c0), Some(c1)) => {
            let p = (groups[0].len() as f64 / points.len() as f64).clamp(0.05, 0.95);
            MixtureParams::new(p, c0, c1).unwrap()
        }
        _ => fallback(),
    }
}
