//! EM for a single BVGE component (no mixture), written directly against the
//! observations. The mixture updates must reduce to these when every
//! responsibility is pinned to one component.

use crate::bvge::{BvgePair, BvgeParams, Region};
use crate::em::mstep::{solve_fixed_point, FixedPointOutcome, LambdaMode};
use crate::em::EmConfig;

fn log1m_exp_neg(z: f64) -> f64 {
    // ln(1 - e^{-z})
    if z > std::f64::consts::LN_2 {
        (-(-z).exp()).ln_1p()
    } else {
        (-(-z).exp_m1()).ln()
    }
}

/// Closed-form shapes at rate `lambda` given the ordering masses implied by
/// `prev`.
pub fn single_shapes(data: &[BvgePair], prev: &BvgeParams, lambda: f64) -> [f64; 3] {
    let [a1, a2, a3] = prev.shapes();
    let (u1, u2) = (a1 / (a1 + a3), a3 / (a1 + a3));
    let (w1, w2) = (a2 / (a2 + a3), a3 / (a2 + a3));
    let mut num = [0.0; 3];
    let mut den = [0.0; 3];
    for p in data {
        let l1 = log1m_exp_neg(lambda * p.x1);
        let l2 = log1m_exp_neg(lambda * p.x2);
        match p.region {
            Region::Diagonal => {
                num[2] += 1.0;
                den[0] += l1;
                den[1] += l1;
                den[2] += l1;
            }
            Region::Lower => {
                num[0] += u1;
                num[1] += 1.0;
                num[2] += u2;
                den[0] += l1;
                den[1] += l2;
                den[2] += l1;
            }
            Region::Upper => {
                num[0] += 1.0;
                num[1] += w1;
                num[2] += w2;
                den[0] += l1;
                den[1] += l2;
                den[2] += l2;
            }
        }
    }
    std::array::from_fn(|k| {
        let v = -num[k] / den[k];
        if v.is_finite() && v > 0.0 {
            v
        } else {
            prev.shapes()[k]
        }
    })
}

/// `g(λ) = E / F` of the rate equation at the given shapes.
pub fn single_rate_map(data: &[BvgePair], prev: &BvgeParams, shapes: [f64; 3], lambda: f64) -> f64 {
    let [a1, a2, a3] = shapes;
    let [p1, _, p3] = prev.shapes();
    let p2 = prev.alpha2();
    let u = p1 / (p1 + p3) + p3 / (p1 + p3);
    let w = p2 / (p2 + p3) + p3 / (p2 + p3);
    let corr = |x: f64| x / (lambda * x).exp_m1();
    let (mut e, mut f) = (0.0, 0.0);
    for p in data {
        match p.region {
            Region::Diagonal => {
                e += 1.0;
                f += p.x1 - (a1 + a2 + a3 - 1.0) * corr(p.x1);
            }
            Region::Lower => {
                e += 2.0 * u;
                f += u * (p.x1 - (a1 + a3 - 1.0) * corr(p.x1)) + p.x2 - (a2 - 1.0) * corr(p.x2);
            }
            Region::Upper => {
                e += 2.0 * w;
                f += w * (p.x2 - (a2 + a3 - 1.0) * corr(p.x2)) + p.x1 - (a1 - 1.0) * corr(p.x1);
            }
        }
    }
    e / f
}

/// One EM update of a single component. Returns the new parameters and the
/// inner solver outcome.
pub fn single_em_step(data: &[BvgePair], current: &BvgeParams, cfg: &EmConfig) -> (BvgeParams, FixedPointOutcome) {
    let lambda0 = current.lambda();
    let (shapes, fp) = match cfg.lambda_update {
        LambdaMode::Profile => {
            let g = |l: f64| single_rate_map(data, current, single_shapes(data, current, l), l);
            let fp = solve_fixed_point(g, lambda0, cfg.fp_tol, cfg.fp_max_iter, cfg.fp_damping);
            (single_shapes(data, current, fp.lambda), fp)
        }
        LambdaMode::FixedShapes => {
            let s = single_shapes(data, current, lambda0);
            let g = |l: f64| single_rate_map(data, current, s, l);
            (s, solve_fixed_point(g, lambda0, cfg.fp_tol, cfg.fp_max_iter, cfg.fp_damping))
        }
    };
    let next = BvgeParams::new(shapes[0], shapes[1], shapes[2], fp.lambda).unwrap_or(*current);
    (next, fp)
}

/// Iterate [`single_em_step`] until the log-likelihood settles.
pub fn single_em_fit(data: &[BvgePair], start: &BvgeParams, cfg: &EmConfig) -> (BvgeParams, usize) {
    let ll = |c: &BvgeParams| data.iter().map(|p| c.ln_density(p)).sum::<f64>();
    let mut cur = *start;
    let mut prev = ll(&cur);
    for it in 1..=cfg.max_iter {
        cur = single_em_step(data, &cur, cfg).0;
        let now = ll(&cur);
        if ((now - prev) / (prev.abs() + 1.0)).abs() < cfg.rel_tol {
            return (cur, it);
        }
        prev = now;
    }
    (cur, cfg.max_iter)
}
