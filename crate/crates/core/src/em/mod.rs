//! Hierarchical EM for the two-component mixture.
//!
//! Two layers of missing data are filled in per iteration: the component
//! label of every observation (responsibilities) and, within a component,
//! which latent variable attained the maximum (fractional masses). The M-step
//! updates the weight in closed form, the shapes in closed form for a given
//! rate, and the rate through a fixed-point equation.

pub mod estep;
pub mod init;
pub mod mstep;
pub mod partition;
pub mod pseudo;
pub mod single;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ParamError;
use crate::mixture::MixtureParams;

pub use estep::{e_step, EStep, FractionalMasses, LatentMasses, Posteriors};
pub use init::InitStrategy;
pub use mstep::{lambda_fixed_point, m_step_shapes, m_step_weight, LambdaMode, MStepStats};
pub use partition::{partition_data, DataPartition};
pub use pseudo::pseudo_loglik;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    #[error("no observations")]
    Empty,
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("row {index}: coordinates must be positive and finite, got ({x1}, {x2})")]
    InvalidObservation { index: usize, x1: f64, x2: f64 },
    #[error("every observation is a tie (x1 == x2); the model cannot be fitted to such data")]
    AllTies,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Weight updates are kept this far from 0 and 1 so that the log terms and
/// the next responsibilities stay finite.
const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub fp_damping: f64,
    pub init: InitStrategy,
    pub tie_tol: f64,
    pub seed: u64,
    pub lambda_update: LambdaMode,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: 5000,
            fp_tol: 1e-9,
            fp_max_iter: 200,
            fp_damping: 1.0,
            init: InitStrategy::Random,
            tie_tol: 0.0,
            seed: 0,
            lambda_update: LambdaMode::Profile,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), EmError> {
        let bad = |what: &str| Err(EmError::Config(what.to_string()));
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return bad("rel_tol must be positive");
        }
        if !(self.fp_tol > 0.0 && self.fp_tol.is_finite()) {
            return bad("fp_tol must be positive");
        }
        if self.max_iter < 1 || self.fp_max_iter < 1 {
            return bad("iteration caps must be at least 1");
        }
        if !(self.fp_damping > 0.0 && self.fp_damping <= 1.0) {
            return bad("fp_damping must lie in (0,1]");
        }
        if !(self.tie_tol >= 0.0 && self.tie_tol.is_finite()) {
            return bad("tie_tol must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MixtureParams,
    pub initial: MixtureParams,
    /// Observed-data log-likelihood at the initial values and after every
    /// M-step; the last entry belongs to `params`.
    pub loglik_trace: Vec<f64>,
    /// Number of M-steps taken.
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// The two fitted components agree to about 1e-6, so `p` is not
    /// identified.
    pub components_coincide: bool,
    pub counts: [usize; 3],
    pub degenerate_points: usize,
    pub mstep: MStepStats,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial value")
    }
}

/// Fit to raw pairs. `init` overrides `cfg.init` when given.
pub fn em_fit(pairs: &[(f64, f64)], cfg: &EmConfig, init: Option<&MixtureParams>) -> Result<FitResult, EmError> {
    cfg.validate()?;
    let part = partition_data(pairs, cfg.tie_tol)?;
    em_fit_partition(&part, cfg, init)
}

/// Fit to data that is already partitioned into the three regions.
pub fn em_fit_partition(
    part: &DataPartition,
    cfg: &EmConfig,
    init: Option<&MixtureParams>,
) -> Result<FitResult, EmError> {
    cfg.validate()?;
    if part.is_empty() {
        return Err(EmError::Empty);
    }
    if part.len() < 2 {
        return Err(EmError::TooFew(part.len()));
    }
    if part.n1() + part.n2() == 0 {
        return Err(EmError::AllTies);
    }
    let initial = match init {
        Some(p) => *p,
        None => init::initial_params(part, cfg.init, cfg.seed),
    };
    let mut params = initial;
    let mut trace = Vec::new();
    let mut stats = MStepStats::default();
    let mut degenerate_points = 0;
    let mut iterations = 0;
    let stop_reason = loop {
        let e = e_step(&params, part);
        degenerate_points += e.degenerate_points;
        trace.push(e.loglik);
        if let [.., prev, cur] = trace[..] {
            if ((cur - prev) / (prev.abs() + 1.0)).abs() < cfg.rel_tol {
                break StopReason::Tolerance;
            }
        }
        if iterations == cfg.max_iter {
            break StopReason::IterationCap;
        }
        params = m_step(&params, &e, part, cfg, &mut stats);
        iterations += 1;
    };
    Ok(FitResult {
        params,
        initial,
        loglik_trace: trace,
        iterations,
        converged: stop_reason == StopReason::Tolerance,
        stop_reason,
        components_coincide: components_coincide(&params),
        counts: [part.n0(), part.n1(), part.n2()],
        degenerate_points,
        mstep: stats,
    })
}

/// One full M-step: weight, then each component's shapes and rate.
pub fn m_step(
    current: &MixtureParams,
    e: &EStep,
    part: &DataPartition,
    cfg: &EmConfig,
    stats: &mut MStepStats,
) -> MixtureParams {
    let p = m_step_weight(&e.posteriors, part.len()).clamp(WEIGHT_FLOOR, 1.0 - WEIGHT_FLOOR);
    let comps: [_; 2] = std::array::from_fn(|k| {
        let w = e.posteriors.for_component(k);
        mstep::update_component(part, &w, &e.masses.comp[k], current.component(k), cfg, stats)
    });
    MixtureParams::new_relaxed(p, comps[0], comps[1])
}

fn components_coincide(m: &MixtureParams) -> bool {
    let a = m.comp0();
    let b = m.comp1();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * x.abs().max(y.abs());
    a.shapes().iter().zip(b.shapes()).all(|(&x, y)| close(x, y)) && close(a.lambda(), b.lambda())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvge::BvgeParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn draw(m: &MixtureParams, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.sample(n, &mut rng).into_iter().map(|l| (l.pair.x1, l.pair.x2)).collect()
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let cfg = EmConfig::default();
        assert_eq!(em_fit(&[], &cfg, None).unwrap_err(), EmError::Empty);
        assert_eq!(em_fit(&[(1.0, 2.0)], &cfg, None).unwrap_err(), EmError::TooFew(1));
        assert_eq!(em_fit(&[(1.0, 1.0), (2.0, 2.0)], &cfg, None).unwrap_err(), EmError::AllTies);
        let bad = EmConfig { fp_damping: 0.0, ..EmConfig::default() };
        assert!(matches!(em_fit(&[(1.0, 2.0), (2.0, 1.0)], &bad, None), Err(EmError::Config(_))));
    }

    #[test]
    fn loglik_never_decreases() {
        let truth = MixtureParams::from_array([0.3, 1.0, 1.2, 1.0, 1.0, 1.0, 1.4, 2.0, 0.5]).unwrap();
        let data = draw(&truth, 300, 1);
        let cfg = EmConfig { seed: 4, max_iter: 400, ..EmConfig::default() };
        let fit = em_fit(&data, &cfg, None).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        assert_eq!(fit.loglik_trace.len(), fit.iterations + 1);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let truth = MixtureParams::from_array([0.6, 0.5, 0.4, 0.3, 2.0, 0.5, 1.5, 0.5, 1.5]).unwrap();
        let data = draw(&truth, 200, 2);
        let cfg = EmConfig { max_iter: 3, rel_tol: 1e-300, ..EmConfig::default() };
        let fit = em_fit(&data, &cfg, None).unwrap();
        assert_eq!(fit.iterations, 3);
        assert!(!fit.converged);
        assert_eq!(fit.stop_reason, StopReason::IterationCap);
    }

    #[test]
    fn identical_components_stay_identical() {
        let c = BvgeParams::new(1.0, 1.5, 0.8, 1.2).unwrap();
        let data = draw(&MixtureParams::new(0.5, c, c).unwrap(), 400, 3);
        let start_c = BvgeParams::new(0.7, 0.7, 0.7, 0.9).unwrap();
        let start = MixtureParams::new(0.4, start_c, start_c).unwrap();
        let fit = em_fit(&data, &EmConfig::default(), Some(&start)).unwrap();
        assert!(fit.converged);
        assert!(fit.components_coincide);
        let (a, b) = (fit.params.comp0().to_owned(), fit.params.comp1().to_owned());
        for (x, y) in a.shapes().iter().zip(b.shapes()).chain([(&a.lambda(), b.lambda())]) {
            assert!((x - y).abs() < 1e-10 * x, "{x} vs {y}");
        }
        assert!((fit.params.p() - 0.4).abs() < 1e-12);
    }
}
