//! Closed-form shape and weight updates and the fixed-point rate update.
//!
//! For one component with per-observation weights `r` and fractional masses
//! `(u₁, u₂, w₁, w₂)`, write `L(x) = ln(1 - e^{-λx})` and
//! `ψ(x) = e^{-λx} / (1 - e^{-λx})`. For a fixed rate the expected
//! complete-data log-likelihood is maximized by
//!
//! ```text
//! α̂₁(λ) = -(u₁ Σ₁ r + Σ₂ r) / A,        A = Σ₀ r L(y) + Σ₁ r L(x₁) + Σ₂ r L(x₁)
//! α̂₂(λ) = -(Σ₁ r + w₁ Σ₂ r) / B,        B = Σ₀ r L(y) + Σ₁ r L(x₂) + Σ₂ r L(x₂)
//! α̂₃(λ) = -(Σ₀ r + u₂ Σ₁ r + w₂ Σ₂ r) / D, D = Σ₀ r L(y) + Σ₁ r L(x₁) + Σ₂ r L(x₂)
//! ```
//!
//! where `Σ₀`, `Σ₁`, `Σ₂` run over the diagonal, `x₁ < x₂` and `x₁ > x₂`
//! observations. The rate solves `g(λ) = λ` with `g = E / F`, `E` a weighted
//! count and `F` a weighted sum of coordinates corrected by `(shape - 1) x ψ(x)`.

use serde::{Deserialize, Serialize};

use crate::bvge::BvgeParams;
use crate::em::estep::{ComponentWeights, LatentMasses, Posteriors};
use crate::em::partition::DataPartition;
use crate::em::EmConfig;
use crate::math::ln1m_exp;

/// Weighted sums over one region at a given rate. `l*` are `Σ r L(x)`,
/// `p*` are `Σ r x ψ(x)`, `x*` are `Σ r x`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegionSums {
    pub r: f64,
    pub x1: f64,
    pub x2: f64,
    pub l1: f64,
    pub l2: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Weighted sums over all three regions for one component at one rate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeightedSums {
    /// On the diagonal `x1 == x2 == y`; only `r`, `x1`, `l1`, `p1` are used.
    pub diag: RegionSums,
    pub lower: RegionSums,
    pub upper: RegionSums,
}

fn x_psi(z: f64, x: f64) -> f64 {
    // x e^{-z} / (1 - e^{-z}) = x / expm1(z)
    x / z.exp_m1()
}

impl WeightedSums {
    pub fn compute(part: &DataPartition, w: &ComponentWeights, lambda: f64) -> Self {
        let mut diag = RegionSums::default();
        for (o, &r) in part.diag.iter().zip(&w.diag) {
            let z = lambda * o.y;
            diag.r += r;
            diag.x1 += r * o.y;
            diag.l1 += r * ln1m_exp(z);
            diag.p1 += r * x_psi(z, o.y);
        }
        diag.x2 = diag.x1;
        diag.l2 = diag.l1;
        diag.p2 = diag.p1;
        let off = |obs: &[crate::em::partition::PairObs], ws: &[f64]| {
            let mut s = RegionSums::default();
            for (o, &r) in obs.iter().zip(ws) {
                let (z1, z2) = (lambda * o.x1, lambda * o.x2);
                s.r += r;
                s.x1 += r * o.x1;
                s.x2 += r * o.x2;
                s.l1 += r * ln1m_exp(z1);
                s.l2 += r * ln1m_exp(z2);
                s.p1 += r * x_psi(z1, o.x1);
                s.p2 += r * x_psi(z2, o.x2);
            }
            s
        };
        Self { diag, lower: off(&part.lower, &w.lower), upper: off(&part.upper, &w.upper) }
    }

    /// Numerators and denominators `A`, `B`, `D` of the shape updates.
    pub fn shape_terms(&self, m: &LatentMasses) -> ShapeTerms {
        let (d, lo, up) = (&self.diag, &self.lower, &self.upper);
        ShapeTerms {
            num: [m.u1 * lo.r + up.r, lo.r + m.w1 * up.r, d.r + m.u2 * lo.r + m.w2 * up.r],
            den: [d.l1 + lo.l1 + up.l1, d.l1 + lo.l2 + up.l2, d.l1 + lo.l1 + up.l2],
        }
    }

    /// `E` of the fixed-point map.
    pub fn fp_numerator(&self, m: &LatentMasses) -> f64 {
        let (d, lo, up) = (&self.diag, &self.lower, &self.upper);
        d.r + 2.0 * m.u1 * lo.r + 2.0 * m.u2 * lo.r + 2.0 * m.w1 * up.r + 2.0 * m.w2 * up.r
    }

    /// `F` of the fixed-point map at shapes `[a1, a2, a3]`.
    pub fn fp_denominator(&self, m: &LatentMasses, shapes: [f64; 3]) -> f64 {
        let [a1, a2, a3] = shapes;
        let (d, lo, up) = (&self.diag, &self.lower, &self.upper);
        let lower_first = lo.x1 - (a1 + a3 - 1.0) * lo.p1;
        let upper_second = up.x2 - (a2 + a3 - 1.0) * up.p2;
        d.x1 - (a1 + a2 + a3 - 1.0) * d.p1
            + m.u1 * lower_first
            + m.u2 * lower_first
            + m.w1 * upper_second
            + m.w2 * upper_second
            + up.x1
            - (a1 - 1.0) * up.p1
            + lo.x2
            - (a2 - 1.0) * lo.p2
    }
}

/// Numerators and denominators of the three shape updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeTerms {
    pub num: [f64; 3],
    /// `A`, `B`, `D` for component 0 (`G`, `H`, `K` for component 1).
    pub den: [f64; 3],
}

impl ShapeTerms {
    /// `-num / den`, or `None` where that is not a positive finite number.
    pub fn solve(&self) -> [Option<f64>; 3] {
        std::array::from_fn(|k| {
            let v = -self.num[k] / self.den[k];
            (v.is_finite() && v > 0.0).then_some(v)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeUpdate {
    pub shapes: [f64; 3],
    pub terms: ShapeTerms,
    /// Shapes whose update was degenerate and kept the previous value.
    pub degenerate: [bool; 3],
}

fn shapes_or_prev(terms: ShapeTerms, prev: [f64; 3]) -> ShapeUpdate {
    let solved = terms.solve();
    ShapeUpdate {
        shapes: std::array::from_fn(|k| solved[k].unwrap_or(prev[k])),
        terms,
        degenerate: std::array::from_fn(|k| solved[k].is_none()),
    }
}

/// Shape updates of `component` at a fixed rate. A degenerate update (zero
/// denominator or numerator) keeps the corresponding entry of `prev`.
pub fn m_step_shapes(
    post: &Posteriors,
    masses: &LatentMasses,
    part: &DataPartition,
    lambda: f64,
    component: usize,
    prev: [f64; 3],
) -> ShapeUpdate {
    let w = post.for_component(component);
    let sums = WeightedSums::compute(part, &w, lambda);
    shapes_or_prev(sums.shape_terms(masses), prev)
}

/// Mean responsibility of component 0.
pub fn m_step_weight(post: &Posteriors, n: usize) -> f64 {
    (post.total() / n as f64).clamp(0.0, 1.0)
}

/// How the shapes enter the rate equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Shapes held at the given values.
    FixedShapes,
    /// Shapes re-solved as `α̂(λ)` at every evaluation of `g`, so the fixed
    /// point maximizes the profile over all four parameters.
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOutcome {
    pub lambda: f64,
    /// `|g(λ) - λ|` at the returned value.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The damped iteration left the positive axis or stalled and a bracketing
    /// search on `g(λ) - λ` produced the answer.
    pub used_bisection: bool,
}

/// Damped fixed-point iteration `λ ← (1-d)λ + d·g(λ)`.
///
/// `d` starts at `damping` and halves whenever consecutive residuals
/// alternate in sign while shrinking by less than half. If `g` leaves the positive reals the
/// root of `g(λ) - λ` is bracketed and bisected instead.
pub fn solve_fixed_point<G: FnMut(f64) -> f64>(
    mut g: G,
    lambda0: f64,
    tol: f64,
    max_iter: usize,
    damping: f64,
) -> FixedPointOutcome {
    let mut lambda = lambda0;
    let mut d = damping.clamp(f64::MIN_POSITIVE, 1.0);
    let mut prev_res: Option<f64> = None;
    for it in 1..=max_iter {
        let gl = g(lambda);
        if !(gl.is_finite() && gl > 0.0) {
            return bracket_and_bisect(&mut g, lambda, tol, it);
        }
        let res = gl - lambda;
        if res.abs() < tol {
            return FixedPointOutcome {
                lambda,
                residual: res.abs(),
                iterations: it,
                converged: true,
                used_bisection: false,
            };
        }
        if let Some(pr) = prev_res {
            if pr.signum() != res.signum() && res.abs() > 0.5 * pr.abs() {
                d *= 0.5;
            }
        }
        prev_res = Some(res);
        lambda = (1.0 - d) * lambda + d * gl;
    }
    let gl = g(lambda);
    let residual = (gl - lambda).abs();
    if residual < tol {
        return FixedPointOutcome { lambda, residual, iterations: max_iter, converged: true, used_bisection: false };
    }
    FixedPointOutcome { lambda, residual, iterations: max_iter, converged: false, used_bisection: false }
}

fn bracket_and_bisect<G: FnMut(f64) -> f64>(g: &mut G, start: f64, tol: f64, spent: usize) -> FixedPointOutcome {
    // h(λ) = g(λ) - λ with g ≤ 0 or non-finite treated as "λ too large"
    let mut h = |l: f64| {
        let v = g(l);
        if v.is_finite() && v > 0.0 {
            v - l
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut lo = start;
    let mut hi = start;
    let mut iterations = spent;
    let mut ok = false;
    for _ in 0..200 {
        iterations += 1;
        if h(lo) > 0.0 {
            ok = true;
            break;
        }
        lo *= 0.5;
    }
    if ok {
        ok = false;
        hi = hi.max(lo);
        for _ in 0..200 {
            iterations += 1;
            if h(hi) < 0.0 {
                ok = true;
                break;
            }
            hi *= 2.0;
        }
    }
    if !ok {
        return FixedPointOutcome {
            lambda: start,
            residual: f64::INFINITY,
            iterations,
            converged: false,
            used_bisection: true,
        };
    }
    let mut best = (f64::INFINITY, start);
    for _ in 0..200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let v = h(mid);
        if v.abs() < best.0 {
            best = (v.abs(), mid);
        }
        if v.abs() < tol || mid <= lo || mid >= hi {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    FixedPointOutcome { lambda: best.1, residual: best.0, iterations, converged: best.0 < tol, used_bisection: true }
}

/// Solve the rate equation for `component`.
///
/// With [`LambdaMode::FixedShapes`] the shapes are `shapes`; with
/// [`LambdaMode::Profile`] they are re-solved at each trial rate (falling back
/// to `shapes` for degenerate entries). The iteration starts at `lambda0`.
#[allow(clippy::too_many_arguments)]
pub fn lambda_fixed_point(
    post: &Posteriors,
    masses: &LatentMasses,
    part: &DataPartition,
    shapes: [f64; 3],
    lambda0: f64,
    component: usize,
    mode: LambdaMode,
    cfg: &EmConfig,
) -> FixedPointOutcome {
    let w = post.for_component(component);
    solve_component_rate(part, &w, masses, shapes, lambda0, mode, cfg)
}

pub(crate) fn solve_component_rate(
    part: &DataPartition,
    w: &ComponentWeights,
    masses: &LatentMasses,
    shapes: [f64; 3],
    lambda0: f64,
    mode: LambdaMode,
    cfg: &EmConfig,
) -> FixedPointOutcome {
    let g = |lambda: f64| {
        let sums = WeightedSums::compute(part, w, lambda);
        let s = match mode {
            LambdaMode::FixedShapes => shapes,
            LambdaMode::Profile => shapes_or_prev(sums.shape_terms(masses), shapes).shapes,
        };
        sums.fp_numerator(masses) / sums.fp_denominator(masses, s)
    };
    solve_fixed_point(g, lambda0, cfg.fp_tol, cfg.fp_max_iter, cfg.fp_damping)
}

/// Bookkeeping from one M-step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MStepStats {
    pub fp_iterations: usize,
    pub fp_unconverged: usize,
    /// Largest `|g(λ) - λ|` among converged inner solves.
    pub fp_max_residual: f64,
    pub degenerate_shapes: usize,
    /// Rate steps rejected because they lowered the expected complete-data
    /// log-likelihood.
    pub rejected_rate_steps: usize,
}

/// New parameters of one component given its weights.
pub(crate) fn update_component(
    part: &DataPartition,
    w: &ComponentWeights,
    masses: &LatentMasses,
    current: &BvgeParams,
    cfg: &EmConfig,
    stats: &mut MStepStats,
) -> BvgeParams {
    let prev_shapes = current.shapes();
    let lambda_old = current.lambda();
    let (shapes, lambda) = match cfg.lambda_update {
        LambdaMode::Profile => {
            let fp = solve_component_rate(part, w, masses, prev_shapes, lambda_old, LambdaMode::Profile, cfg);
            record(stats, &fp);
            let old = shapes_or_prev(WeightedSums::compute(part, w, lambda_old).shape_terms(masses), prev_shapes);
            let new = shapes_or_prev(WeightedSums::compute(part, w, fp.lambda).shape_terms(masses), prev_shapes);
            let q_old = component_q(part, w, masses, old.shapes, lambda_old);
            let q_new = component_q(part, w, masses, new.shapes, fp.lambda);
            if fp.lambda.is_finite() && fp.lambda > 0.0 && q_new >= q_old {
                stats.degenerate_shapes += new.degenerate.iter().filter(|&&d| d).count();
                (new.shapes, fp.lambda)
            } else {
                stats.rejected_rate_steps += 1;
                stats.degenerate_shapes += old.degenerate.iter().filter(|&&d| d).count();
                (old.shapes, lambda_old)
            }
        }
        LambdaMode::FixedShapes => {
            // conditional maximization: shapes at the current rate, then the rate
            let upd = shapes_or_prev(WeightedSums::compute(part, w, lambda_old).shape_terms(masses), prev_shapes);
            stats.degenerate_shapes += upd.degenerate.iter().filter(|&&d| d).count();
            let fp = solve_component_rate(part, w, masses, upd.shapes, lambda_old, LambdaMode::FixedShapes, cfg);
            record(stats, &fp);
            let q_old = component_q(part, w, masses, upd.shapes, lambda_old);
            let q_new = component_q(part, w, masses, upd.shapes, fp.lambda);
            if fp.lambda.is_finite() && fp.lambda > 0.0 && q_new >= q_old {
                (upd.shapes, fp.lambda)
            } else {
                stats.rejected_rate_steps += 1;
                (upd.shapes, lambda_old)
            }
        }
    };
    BvgeParams::new(shapes[0], shapes[1], shapes[2], lambda).unwrap_or(*current)
}

fn record(stats: &mut MStepStats, fp: &FixedPointOutcome) {
    stats.fp_iterations += fp.iterations;
    if fp.converged {
        stats.fp_max_residual = stats.fp_max_residual.max(fp.residual);
    } else {
        stats.fp_unconverged += 1;
    }
}

/// Expected complete-data log-likelihood contribution of one component
/// (everything except the mixing-weight terms).
pub(crate) fn component_q(
    part: &DataPartition,
    w: &ComponentWeights,
    m: &LatentMasses,
    shapes: [f64; 3],
    lambda: f64,
) -> f64 {
    let s = WeightedSums::compute(part, w, lambda);
    component_q_from_sums(&s, m, shapes, lambda)
}

pub(crate) fn component_q_from_sums(s: &WeightedSums, m: &LatentMasses, shapes: [f64; 3], lambda: f64) -> f64 {
    let [a1, a2, a3] = shapes;
    let ll = lambda.ln();
    let (d, lo, up) = (&s.diag, &s.lower, &s.upper);
    // terms with a zero weight sum contribute nothing, even if the log is -inf
    let wln = |weight: f64, v: f64| if weight == 0.0 { 0.0 } else { weight * v.ln() };
    let diag = wln(d.r, a3) + d.r * ll + (a1 + a2 + a3 - 1.0) * d.l1 - lambda * d.x1;
    let lower_latent = |shape: f64| wln(lo.r, shape) + 2.0 * lo.r * ll - lambda * lo.x1 + (a1 + a3 - 1.0) * lo.l1;
    let lower =
        m.u1 * lower_latent(a1) + m.u2 * lower_latent(a3) + (wln(lo.r, a2) - lambda * lo.x2 + (a2 - 1.0) * lo.l2);
    let upper_latent = |shape: f64| wln(up.r, shape) + 2.0 * up.r * ll - lambda * up.x2 + (a2 + a3 - 1.0) * up.l2;
    let upper =
        m.w1 * upper_latent(a2) + m.w2 * upper_latent(a3) + (wln(up.r, a1) - lambda * up.x1 + (a1 - 1.0) * up.l1);
    diag + lower + upper
}
