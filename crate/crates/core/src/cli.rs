//! The `mbvge` command-line tool.
//!
//! Arguments are first resolved into a [`Resolved`] command with every
//! default filled in and parameter files read. That value is executed and
//! stored in the run manifest, so `mbvge replay` reruns exactly the same
//! computation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bvge::{BvgePair, Region};
use crate::dependence::{dependence_summary, CopulaModel, DependenceSummary};
use crate::em::{em_fit, EmConfig, EmError, FitResult, InitStrategy, LambdaMode, StopReason};
use crate::error::ParamError;
use crate::io::{self, IoError, PartialParams, RunManifest};
use crate::mixture::{MixtureParams, PARAM_NAMES};
use crate::study::{format_table, run_study, StudyConfig, StudyError, StudyReport};

/// Exit status 1: the computation failed.
pub const EXIT_RUNTIME: i32 = 1;
/// Exit status 2: bad arguments or input.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl ToString) -> Self {
        Self { code: EXIT_USAGE, message: m.to_string() }
    }
    fn runtime(m: impl ToString) -> Self {
        Self { code: EXIT_RUNTIME, message: m.to_string() }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        Self::usage(e)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse { .. } | IoError::Json { .. } => Self::usage(e),
            _ => Self::runtime(e),
        }
    }
}

impl From<EmError> for CliError {
    fn from(e: EmError) -> Self {
        match e {
            EmError::AllTies => Self::runtime(e),
            _ => Self::usage(e),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Pool(_) => Self::runtime(e),
            _ => Self::usage(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mbvge", version, about = "Mixtures of bivariate generalized exponential distributions")]
pub struct Cli {
    /// Worker threads for simulation studies.
    #[arg(long, env = "MBVGE_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw pairs from a mixture.
    Sample {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the density on a square grid.
    DensityGrid {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0.0)]
        xmin: f64,
        #[arg(long)]
        xmax: f64,
        #[arg(long)]
        steps: usize,
        /// Off-diagonal grid `x1,x2,density`.
        #[arg(long)]
        out: PathBuf,
        /// Density of the diagonal part, `x,diag_density` (default: `<out stem>_diag.csv`).
        #[arg(long)]
        diag_out: Option<PathBuf>,
    },
    /// Fit the mixture to pairs read from a CSV file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        em: EmArgs,
        /// Starting values instead of the initialization strategy.
        #[arg(long)]
        init_params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter-recovery study described by a JSON file.
    Simstudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Copula-based dependence measures of a mixture.
    Dependence {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write the primary output here instead of the recorded path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Mixture parameters from a JSON file and/or flags; flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// JSON object with any of the keys p, a1, a2, a3, l1, b1, b2, b3, l2.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a3: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub l1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b3: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub l2: Option<f64>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<MixtureParams, CliError> {
        let base = match &self.params {
            Some(path) => io::read_json::<PartialParams>(path)?,
            None => PartialParams::default(),
        };
        let flags = PartialParams {
            p: self.p,
            a1: self.a1,
            a2: self.a2,
            a3: self.a3,
            l1: self.l1,
            b1: self.b1,
            b2: self.b2,
            b3: self.b3,
            l2: self.l2,
        };
        let merged = base.overlay(&flags).to_array();
        let missing: Vec<&str> = (0..9).filter(|&k| merged[k].is_none()).map(|k| PARAM_NAMES[k]).collect();
        if !missing.is_empty() {
            return Err(CliError::usage(format!("missing parameters: {}", missing.join(", "))));
        }
        Ok(MixtureParams::from_array(std::array::from_fn(|k| merged[k].unwrap()))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Moment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LambdaArg {
    Profile,
    FixedShapes,
}

/// EM settings: an optional JSON file, then individual flags on top.
#[derive(Debug, Clone, Default, Args)]
pub struct EmArgs {
    /// JSON object with EM settings (same keys as the flags, snake_case).
    #[arg(long)]
    pub em_config: Option<PathBuf>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub fp_tol: Option<f64>,
    #[arg(long)]
    pub fp_max_iter: Option<usize>,
    #[arg(long)]
    pub fp_damping: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long)]
    pub tie_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub lambda_update: Option<LambdaArg>,
}

impl EmArgs {
    pub fn resolve(&self) -> Result<EmConfig, CliError> {
        let mut c = match &self.em_config {
            Some(path) => io::read_json::<EmConfig>(path)?,
            None => EmConfig::default(),
        };
        c.rel_tol = self.rel_tol.unwrap_or(c.rel_tol);
        c.max_iter = self.max_iter.unwrap_or(c.max_iter);
        c.fp_tol = self.fp_tol.unwrap_or(c.fp_tol);
        c.fp_max_iter = self.fp_max_iter.unwrap_or(c.fp_max_iter);
        c.fp_damping = self.fp_damping.unwrap_or(c.fp_damping);
        c.tie_tol = self.tie_tol.unwrap_or(c.tie_tol);
        c.seed = self.seed.unwrap_or(c.seed);
        if let Some(i) = self.init {
            c.init = match i {
                InitArg::Random => InitStrategy::Random,
                InitArg::Moment => InitStrategy::Moment,
            };
        }
        if let Some(l) = self.lambda_update {
            c.lambda_update = match l {
                LambdaArg::Profile => LambdaMode::Profile,
                LambdaArg::FixedShapes => LambdaMode::FixedShapes,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

/// A command with all inputs resolved; this is what a manifest records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Resolved {
    Sample { params: MixtureParams, n: usize, seed: u64, out: PathBuf },
    DensityGrid { params: MixtureParams, xmin: f64, xmax: f64, steps: usize, out: PathBuf, diag_out: PathBuf },
    Fit { data: PathBuf, em: EmConfig, init: Option<MixtureParams>, out: PathBuf },
    Simstudy { config: StudyConfig, out_dir: PathBuf },
    Dependence { params: MixtureParams, out: PathBuf },
}

/// `grid.csv` → `grid_diag.csv`.
pub fn default_diag_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_diag.{}", ext.to_string_lossy()),
        None => format!("{stem}_diag"),
    };
    out.with_file_name(name)
}

impl Resolved {
    fn seed(&self) -> Option<u64> {
        match self {
            Resolved::Sample { seed, .. } => Some(*seed),
            Resolved::Fit { em, .. } => Some(em.seed),
            Resolved::Simstudy { config, .. } => Some(config.seed),
            _ => None,
        }
    }

    fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Resolved::Fit { data, .. } => vec![data.clone()],
            _ => Vec::new(),
        }
    }

    fn outputs(&self) -> Vec<PathBuf> {
        match self {
            Resolved::Sample { out, .. } | Resolved::Fit { out, .. } | Resolved::Dependence { out, .. } => {
                vec![out.clone()]
            }
            Resolved::DensityGrid { out, diag_out, .. } => vec![out.clone(), diag_out.clone()],
            Resolved::Simstudy { out_dir, .. } => {
                vec![out_dir.join("replications.csv"), out_dir.join("summary.json")]
            }
        }
    }

    /// Redirect the primary output.
    pub fn with_output(mut self, path: PathBuf) -> Self {
        match &mut self {
            Resolved::Sample { out, .. } | Resolved::Fit { out, .. } | Resolved::Dependence { out, .. } => *out = path,
            Resolved::DensityGrid { out, diag_out, .. } => {
                *diag_out = default_diag_path(&path);
                *out = path;
            }
            Resolved::Simstudy { out_dir, .. } => *out_dir = path,
        }
        self
    }
}

/// Either a fresh command or a replay, resolved.
pub fn resolve(command: &Command) -> Result<Resolved, CliError> {
    Ok(match command {
        Command::Sample { params, n, seed, out } => {
            Resolved::Sample { params: params.resolve()?, n: *n, seed: *seed, out: out.clone() }
        }
        Command::DensityGrid { params, xmin, xmax, steps, out, diag_out } => {
            if !(*xmin >= 0.0 && xmax > xmin && xmax.is_finite()) {
                return Err(CliError::usage("need 0 <= xmin < xmax"));
            }
            if *steps < 2 {
                return Err(CliError::usage("steps must be at least 2"));
            }
            Resolved::DensityGrid {
                params: params.resolve()?,
                xmin: *xmin,
                xmax: *xmax,
                steps: *steps,
                out: out.clone(),
                diag_out: diag_out.clone().unwrap_or_else(|| default_diag_path(out)),
            }
        }
        Command::Fit { data, em, init_params, out } => {
            let init = match init_params {
                Some(path) => Some(ParamArgs { params: Some(path.clone()), ..ParamArgs::default() }.resolve()?),
                None => None,
            };
            Resolved::Fit { data: data.clone(), em: em.resolve()?, init, out: out.clone() }
        }
        Command::Simstudy { config, out_dir } => {
            let cfg: StudyConfig = io::read_json(config)?;
            cfg.validate()?;
            Resolved::Simstudy { config: cfg, out_dir: out_dir.clone() }
        }
        Command::Dependence { params, out } => Resolved::Dependence { params: params.resolve()?, out: out.clone() },
        Command::Replay { manifest, out } => {
            let m: RunManifest = io::read_json(manifest)?;
            let r: Resolved = serde_json::from_value(m.command)
                .map_err(|e| CliError::usage(format!("{}: {e}", manifest.display())))?;
            match out {
                Some(p) => r.with_output(p.clone()),
                None => r,
            }
        }
    })
}

/// Output of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub estimates: MixtureParams,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub components_coincide: bool,
    pub initial: MixtureParams,
    pub counts: [usize; 3],
    pub config: EmConfig,
}

impl FitOutput {
    fn new(fit: FitResult, config: EmConfig) -> Self {
        Self {
            estimates: fit.params,
            loglik: fit.loglik(),
            loglik_trace: fit.loglik_trace,
            iterations: fit.iterations,
            converged: fit.converged,
            stop_reason: fit.stop_reason,
            components_coincide: fit.components_coincide,
            initial: fit.initial,
            counts: fit.counts,
            config,
        }
    }
}

/// Output of `dependence`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceOutput {
    pub params: MixtureParams,
    pub distribution: DependenceSummary,
    pub component_mixture: DependenceSummary,
}

/// Summary file of `simstudy` (the per-replication rows go to CSV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub config: StudyConfig,
    pub params: Vec<crate::study::ParamSummary>,
    pub used: usize,
    pub capped: usize,
    pub failed: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_study(dir: &Path, report: &StudyReport) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    let mut header = vec!["rep", "seed"];
    header.extend(PARAM_NAMES);
    header.extend(["iterations", "converged"]);
    let rows = report.records.iter().map(|r| {
        let mut row = vec![r.rep.to_string(), r.seed.to_string()];
        let est = r.estimates.map(|e| e.to_array());
        row.extend((0..9).map(|k| fmt_opt(est.map(|v| v[k]))));
        row.push(r.iterations.to_string());
        row.push(r.converged.to_string());
        row
    });
    io::write_csv(&dir.join("replications.csv"), &header, rows)?;
    let summary = StudySummary {
        config: report.config.clone(),
        params: report.params.clone(),
        used: report.used,
        capped: report.capped,
        failed: report.failed,
    };
    io::write_json(&dir.join("summary.json"), &summary)?;
    Ok(())
}

/// Execute a resolved command and write its outputs and manifest. Returns
/// text for standard output.
pub fn execute(r: &Resolved, threads: Option<usize>) -> Result<String, CliError> {
    let started = io::unix_now();
    let mut stdout = String::new();
    match r {
        Resolved::Sample { params, n, seed, out } => {
            let draws = params.sample_seeded(*n, *seed);
            io::write_sample_csv(out, &draws)?;
        }
        Resolved::DensityGrid { params, xmin, xmax, steps, out, diag_out } => {
            let xs: Vec<f64> = (0..*steps).map(|i| xmin + (xmax - xmin) * i as f64 / (*steps - 1) as f64).collect();
            let mut rows = Vec::with_capacity(steps * steps);
            for &x1 in &xs {
                for &x2 in &xs {
                    // on the diagonal the x1 < x2 expression is used
                    let region = if x1 > x2 { Region::Upper } else { Region::Lower };
                    let d = params.density(&BvgePair { x1, x2, region }).value();
                    rows.push(vec![x1.to_string(), x2.to_string(), d.to_string()]);
                }
            }
            io::write_csv(out, &["x1", "x2", "density"], rows)?;
            let diag = xs.iter().map(|&x| {
                let d = params.density(&BvgePair { x1: x, x2: x, region: Region::Diagonal }).value();
                vec![x.to_string(), d.to_string()]
            });
            io::write_csv(diag_out, &["x", "diag_density"], diag)?;
        }
        Resolved::Fit { data, em, init, out } => {
            let pairs = io::read_pairs_file(data)?;
            let fit = em_fit(&pairs, em, init.as_ref())?;
            io::write_json(out, &FitOutput::new(fit, em.clone()))?;
        }
        Resolved::Simstudy { config, out_dir } => {
            let report = run_study(config, threads)?;
            write_study(out_dir, &report)?;
            stdout = format_table(&report);
        }
        Resolved::Dependence { params, out } => {
            let o = DependenceOutput {
                params: *params,
                distribution: dependence_summary(params, CopulaModel::Distribution),
                component_mixture: dependence_summary(params, CopulaModel::ComponentMixture),
            };
            io::write_json(out, &o)?;
        }
    }
    let outputs = r.outputs();
    let manifest = RunManifest {
        tool: "mbvge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: serde_json::to_value(r).map_err(CliError::runtime)?,
        seed: r.seed(),
        inputs: r.inputs().iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        started_unix: started,
        finished_unix: io::unix_now(),
    };
    io::write_json(&io::manifest_path(&outputs[0]), &manifest)?;
    Ok(stdout)
}

/// Parse, resolve and execute; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match resolve(&cli.command).and_then(|r| execute(&r, cli.threads)) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
