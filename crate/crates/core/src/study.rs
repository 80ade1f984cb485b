//! Monte Carlo parameter-recovery studies: draw `R` samples of size `n` from a
//! known mixture, fit each, and report the average estimate (AE) and mean
//! squared error (MSE) of every parameter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::em::{em_fit_partition, DataPartition, EmConfig, EmError};
use crate::math::splitmix64;
use crate::mixture::{MixtureParams, PARAM_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelResolution {
    /// Pick the labelling closest to the truth.
    #[default]
    MatchTruth,
    /// Component 0 is the one with the larger rate.
    LambdaOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub truth: MixtureParams,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub em: EmConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub label_resolution: LabelResolution,
    /// Leave fits that hit the iteration cap out of AE and MSE.
    #[serde(default)]
    pub exclude_capped: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error("sample size must be at least 50, got {0}")]
    SampleSize(usize),
    #[error("at least one replication is needed")]
    NoReplications,
    #[error(transparent)]
    Em(#[from] EmError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.n < 50 {
            return Err(StudyError::SampleSize(self.n));
        }
        if self.replications < 1 {
            return Err(StudyError::NoReplications);
        }
        self.em.validate()?;
        Ok(())
    }
}

/// Seed of replication `rep`: the `rep`-th output of a SplitMix64 stream
/// started at the master seed.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    splitmix64(master.wrapping_add((rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Choose between the estimate and its component swap.
pub fn resolve_labels(estimate: &MixtureParams, truth: &MixtureParams, mode: LabelResolution) -> MixtureParams {
    let swapped = estimate.swapped_components();
    match mode {
        LabelResolution::MatchTruth => {
            if relative_distance(&swapped, truth) < relative_distance(estimate, truth) {
                swapped
            } else {
                *estimate
            }
        }
        LabelResolution::LambdaOrder => {
            if estimate.comp1().lambda() > estimate.comp0().lambda() {
                swapped
            } else {
                *estimate
            }
        }
    }
}

/// `Σ ((θ̂ᵢ - θᵢ) / θᵢ)²` over the nine parameters.
pub fn relative_distance(a: &MixtureParams, truth: &MixtureParams) -> f64 {
    a.to_array().iter().zip(truth.to_array()).map(|(x, t)| ((x - t) / t).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: u64,
    /// Label-resolved estimates; `None` when the fit failed.
    pub estimates: Option<MixtureParams>,
    pub iterations: usize,
    pub converged: bool,
    pub loglik: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub ae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub params: Vec<ParamSummary>,
    /// Replications entering AE and MSE.
    pub used: usize,
    /// Fits stopped by the iteration cap (included unless `exclude_capped`).
    pub capped: usize,
    /// Fits that returned an error; always excluded.
    pub failed: usize,
    pub records: Vec<ReplicationRecord>,
}

impl StudyReport {
    pub fn ae(&self) -> [f64; 9] {
        std::array::from_fn(|k| self.params[k].ae)
    }
    pub fn mse(&self) -> [f64; 9] {
        std::array::from_fn(|k| self.params[k].mse)
    }
}

fn run_replication(cfg: &StudyConfig, rep: usize) -> ReplicationRecord {
    let seed = replication_seed(cfg.seed, rep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = cfg.truth.sample(cfg.n, &mut rng).into_iter().map(|l| l.pair).collect();
    let em = EmConfig { seed: splitmix64(seed), ..cfg.em.clone() };
    let fit = DataPartition::from_classified(&pairs).and_then(|part| em_fit_partition(&part, &em, None));
    match fit {
        Ok(f) => ReplicationRecord {
            rep,
            seed,
            estimates: Some(resolve_labels(&f.params, &cfg.truth, cfg.label_resolution)),
            iterations: f.iterations,
            converged: f.converged,
            loglik: Some(f.loglik()),
            error: None,
        },
        Err(e) => ReplicationRecord {
            rep,
            seed,
            estimates: None,
            iterations: 0,
            converged: false,
            loglik: None,
            error: Some(e.to_string()),
        },
    }
}

/// Run every replication on a pool of `threads` workers (`None`: rayon's
/// default). The report does not depend on the thread count.
pub fn run_study(cfg: &StudyConfig, threads: Option<usize>) -> Result<StudyReport, StudyError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| StudyError::Pool(e.to_string()))?;
    let records: Vec<ReplicationRecord> =
        pool.install(|| (0..cfg.replications).into_par_iter().map(|r| run_replication(cfg, r)).collect());
    Ok(summarize(cfg, records))
}

/// AE and MSE over the usable records, accumulated in replication order.
pub fn summarize(cfg: &StudyConfig, records: Vec<ReplicationRecord>) -> StudyReport {
    let truth = cfg.truth.to_array();
    let mut sum = [0.0; 9];
    let mut sq = [0.0; 9];
    let (mut used, mut capped, mut failed) = (0, 0, 0);
    for r in &records {
        let Some(est) = r.estimates else {
            failed += 1;
            continue;
        };
        if !r.converged {
            capped += 1;
            if cfg.exclude_capped {
                continue;
            }
        }
        used += 1;
        for (k, v) in est.to_array().iter().enumerate() {
            sum[k] += v;
            sq[k] += (v - truth[k]).powi(2);
        }
    }
    let denom = used.max(1) as f64;
    let params = (0..9)
        .map(|k| ParamSummary {
            name: PARAM_NAMES[k].to_string(),
            truth: truth[k],
            ae: if used > 0 { sum[k] / denom } else { f64::NAN },
            mse: if used > 0 { sq[k] / denom } else { f64::NAN },
        })
        .collect();
    StudyReport { config: cfg.clone(), params, used, capped, failed, records }
}

/// Plain-text table of truth, AE and MSE per parameter.
pub fn format_table(report: &StudyReport) -> String {
    let mut out = format!(
        "n = {}, replications = {} (used {}, capped {}, failed {})\n",
        report.config.n, report.config.replications, report.used, report.capped, report.failed
    );
    out.push_str(&format!("{:<6}{:>12}{:>12}{:>12}\n", "param", "truth", "AE", "MSE"));
    for p in &report.params {
        out.push_str(&format!("{:<6}{:>12.4}{:>12.5}{:>12.5}\n", p.name, p.truth, p.ae, p.mse));
    }
    out
}
