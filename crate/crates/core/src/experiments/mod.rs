//! Seeded replications over a stepsize/regularization grid, with mean and
//! standard-error curves for every logged metric.

mod rates;
mod report;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::par::{map_indexed, Execution};
use crate::policy::FeatureMap;
use crate::two_timescale::{
    run, Algorithm, IterateLog, RunConfig, StepSchedule, DEFAULT_ACTOR_COEFF, DEFAULT_CRITIC_COEFF,
    DEFAULT_ORACLE_STRIDE,
};

pub use rates::{
    ac_gradient_case, fit_rate_exponent, nac_gap_case, smooth_curve, Curve, RateCase, RateFit,
    TrackingRegime, LOG_STEP, MIN_FIT_POINTS,
};
pub use report::{build_report, emit_report, GridReport, MetricReport, RateReport};

/// Environment variable that overrides `base_seed`.
pub const SEED_ENV: &str = "TTS_AC_SEED";

/// Default smoothing half-window, in [`LOG_STEP`] units.
pub const DEFAULT_HALF_WINDOW: usize = 2;

/// Actor/critic exponents `(σ, ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub sigma: f64,
    pub nu: f64,
}

fn default_actor_coeff() -> f64 {
    DEFAULT_ACTOR_COEFF
}
fn default_critic_coeff() -> f64 {
    DEFAULT_CRITIC_COEFF
}
fn default_oracle_stride() -> usize {
    DEFAULT_ORACLE_STRIDE
}
fn default_log_stride() -> usize {
    10 * DEFAULT_ORACLE_STRIDE
}
fn default_half_window() -> usize {
    DEFAULT_HALF_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// MDP JSON path; relative paths resolve against the spec file's directory.
    pub mdp: PathBuf,
    pub algorithm: Algorithm,
    pub grid: Vec<ExponentPair>,
    pub lambdas: Vec<f64>,
    pub horizon: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_actor_coeff")]
    pub actor_coeff: f64,
    #[serde(default = "default_critic_coeff")]
    pub critic_coeff: f64,
    #[serde(default)]
    pub r_theta: Option<f64>,
    #[serde(default = "default_oracle_stride")]
    pub oracle_stride: usize,
    #[serde(default = "default_log_stride")]
    pub log_stride: usize,
    #[serde(default = "default_half_window")]
    pub half_window: usize,
}

impl ExperimentSpec {
    /// Spec with default coefficients and strides.
    pub fn new(
        mdp: impl Into<PathBuf>,
        algorithm: Algorithm,
        grid: Vec<ExponentPair>,
        lambdas: Vec<f64>,
        horizon: usize,
        n_seeds: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            mdp: mdp.into(),
            algorithm,
            grid,
            lambdas,
            horizon,
            n_seeds,
            base_seed,
            out: None,
            actor_coeff: DEFAULT_ACTOR_COEFF,
            critic_coeff: DEFAULT_CRITIC_COEFF,
            r_theta: None,
            oracle_stride: DEFAULT_ORACLE_STRIDE,
            log_stride: default_log_stride(),
            half_window: DEFAULT_HALF_WINDOW,
        }
    }

    /// Reads a spec file, resolving a relative MDP path against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut spec: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if spec.mdp.is_relative() {
            if let Some(dir) = path.parent() {
                spec.mdp = dir.join(&spec.mdp);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::Config("n_seeds must be at least 1".into()));
        }
        if self.grid.is_empty() || self.lambdas.is_empty() {
            return Err(Error::Config("grid and lambdas must be non-empty".into()));
        }
        for p in &self.grid {
            if !(0.0 < p.nu && p.nu < p.sigma && p.sigma <= 1.0) {
                return Err(Error::Config(format!(
                    "need 0 < ν < σ ≤ 1, got σ = {}, ν = {}",
                    p.sigma, p.nu
                )));
            }
        }
        for job in self.jobs().take(1) {
            self.run_config(&job).validate()?;
        }
        for &l in &self.lambdas {
            if !(l > 0.0) {
                return Err(Error::BadLambda(l));
            }
        }
        Ok(())
    }

    pub fn run_config(&self, job: &Job) -> RunConfig {
        RunConfig {
            algorithm: self.algorithm,
            actor_schedule: StepSchedule::new(self.actor_coeff, job.sigma),
            critic_schedule: StepSchedule::new(self.critic_coeff, job.nu),
            lambda: job.lambda,
            r_theta: self.r_theta,
            horizon: self.horizon,
            w0: None,
            theta0: None,
            log_stride: self.log_stride,
            oracle_stride: self.oracle_stride,
        }
    }

    /// Grid points in spec order: exponent pairs outer, lambdas inner.
    pub fn grid_points(&self) -> impl Iterator<Item = (ExponentPair, f64)> + '_ {
        self.grid
            .iter()
            .flat_map(move |p| self.lambdas.iter().map(move |&l| (*p, l)))
    }

    fn jobs(&self) -> impl Iterator<Item = Job> + '_ {
        self.grid_points().flat_map(move |(p, lambda)| {
            (0..self.n_seeds).map(move |i| Job {
                sigma: p.sigma,
                nu: p.nu,
                lambda,
                seed: self.base_seed.wrapping_add(i as u64),
            })
        })
    }

    /// Applies the seed environment override, if set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(value) = std::env::var(SEED_ENV) {
            self.base_seed = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={value:?} is not an integer")))?;
        }
        Ok(self)
    }
}

/// One replication: a grid point and a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub sigma: f64,
    pub nu: f64,
    pub lambda: f64,
    pub seed: u64,
}

/// Pointwise mean and standard error across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl MeanCurve {
    fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns.len() as f64;
        let len = columns[0].len();
        let mut mean = vec![0.0; len];
        let mut stderr = vec![0.0; len];
        for k in 0..len {
            let m = columns.iter().map(|c| c[k]).sum::<f64>() / n;
            mean[k] = m;
            if columns.len() > 1 {
                let var = columns.iter().map(|c| (c[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
                stderr[k] = (var / n).sqrt();
            }
        }
        Self { mean, stderr }
    }

    pub fn curve(&self, t: &[f64]) -> Curve {
        Curve::new(t.to_vec(), self.mean.clone())
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregated replications for one `(σ, ν, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCurves {
    pub sigma: f64,
    pub nu: f64,
    pub lambda: f64,
    pub n_seeds: usize,
    /// True when `n_seeds = 1` and all standard errors are zero by construction.
    pub single_seed: bool,
    pub t: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub tracking_err: MeanCurve,
    pub grad_norm_sq: MeanCurve,
    pub opt_gap: MeanCurve,
    /// Mean ± stderr of `‖∇J(w_T̂)‖²` and `J* − J(w_T̂)` at the sampled output index.
    pub output_grad_norm_sq: (f64, f64),
    pub output_opt_gap: (f64, f64),
    /// Mean over seeds of the `α`-weighted average of logged `‖∇J(w_t)‖²`, `t < T`.
    pub weighted_grad_norm_sq: f64,
}

impl GridCurves {
    fn aggregate(sigma: f64, nu: f64, lambda: f64, logs: &[IterateLog]) -> Self {
        let first = &logs[0];
        let t: Vec<f64> = first.records.iter().map(|r| r.t as f64).collect();
        let column = |f: fn(&crate::two_timescale::IterateRecord) -> f64| -> Vec<Vec<f64>> {
            logs.iter().map(|l| l.records.iter().map(f).collect()).collect()
        };
        let outputs: Vec<_> = logs.iter().filter_map(|l| l.output.as_ref()).collect();
        let (output_grad_norm_sq, output_opt_gap) = if outputs.is_empty() {
            ((f64::NAN, 0.0), (f64::NAN, 0.0))
        } else {
            (
                mean_and_stderr(&outputs.iter().map(|o| o.grad_norm_sq).collect::<Vec<_>>()),
                mean_and_stderr(&outputs.iter().map(|o| o.opt_gap).collect::<Vec<_>>()),
            )
        };
        let weighted: Vec<f64> = logs.iter().map(weighted_grad_norm_sq).collect();
        Self {
            sigma,
            nu,
            lambda,
            n_seeds: logs.len(),
            single_seed: logs.len() == 1,
            alpha: first.records.iter().map(|r| r.alpha).collect(),
            beta: first.records.iter().map(|r| r.beta).collect(),
            t,
            tracking_err: MeanCurve::from_columns(&column(|r| r.tracking_err)),
            grad_norm_sq: MeanCurve::from_columns(&column(|r| r.grad_norm_sq)),
            opt_gap: MeanCurve::from_columns(&column(|r| r.opt_gap)),
            output_grad_norm_sq,
            output_opt_gap,
            weighted_grad_norm_sq: weighted.iter().sum::<f64>() / weighted.len() as f64,
        }
    }

    pub fn tracking_curve(&self) -> Curve {
        self.tracking_err.curve(&self.t)
    }

    pub fn grad_curve(&self) -> Curve {
        self.grad_norm_sq.curve(&self.t)
    }

    pub fn gap_curve(&self) -> Curve {
        self.opt_gap.curve(&self.t)
    }
}

/// `Σ α_t ‖∇J(w_t)‖² / Σ α_t` over the logged steps before the horizon.
pub fn weighted_grad_norm_sq(log: &IterateLog) -> f64 {
    let last = log.records.last().map_or(0, |r| r.t);
    let (num, den) = log
        .records
        .iter()
        .filter(|r| r.t < last || log.records.len() == 1)
        .fold((0.0, 0.0), |(n, d), r| (n + r.alpha * r.grad_norm_sq, d + r.alpha));
    num / den
}

/// Runs every `(grid point, seed)` job, seeds `base_seed + i`, and aggregates
/// per grid point in spec order.
pub fn run_replications(spec: &ExperimentSpec, execution: Execution) -> Result<Vec<GridCurves>> {
    let mdp = TabularMdp::load(&spec.mdp)?;
    run_replications_on(&mdp, spec, execution)
}

pub fn run_replications_on(
    mdp: &TabularMdp,
    spec: &ExperimentSpec,
    execution: Execution,
) -> Result<Vec<GridCurves>> {
    spec.validate()?;
    let map = FeatureMap::for_mdp(mdp);
    let jobs: Vec<Job> = spec.jobs().collect();
    let logs = map_indexed(jobs.len(), execution, |i| {
        let job = &jobs[i];
        run(mdp, &map, &spec.run_config(job), job.seed).inspect_err(|e| {
            if let Error::NonFiniteIterate { .. } = e {
                eprintln!(
                    "diverged at σ = {}, ν = {}, λ = {}, seed = {}",
                    job.sigma, job.nu, job.lambda, job.seed
                );
            }
        })
    });
    let collected = logs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(collected
        .chunks(spec.n_seeds)
        .zip(spec.grid_points())
        .map(|(logs, (p, lambda))| GridCurves::aggregate(p.sigma, p.nu, lambda, logs))
        .collect())
}
