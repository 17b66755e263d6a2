//! Simultaneous critic (fast) and actor (slow) updates on the restart chain.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::q_sample;
use crate::mdp::{sample_index, TabularMdp};
use crate::oracle::{optimal_value, tracking_oracle};
use crate::policy::FeatureMap;
use crate::rng::{self, SimRng};

/// Default actor coefficient `c_α`.
pub const DEFAULT_ACTOR_COEFF: f64 = 0.1;
/// Default critic coefficient `c_β`.
pub const DEFAULT_CRITIC_COEFF: f64 = 0.5;
pub const DEFAULT_ORACLE_STRIDE: usize = 100;

/// Polynomially diminishing stepsize `coeff / (t + 1)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub coeff: f64,
    pub exponent: f64,
}

impl StepSchedule {
    pub fn new(coeff: f64, exponent: f64) -> Self {
        Self { coeff, exponent }
    }

    pub fn at(&self, t: usize) -> f64 {
        stepsize(self, t)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.coeff > 0.0 && self.coeff.is_finite()) {
            return Err(Error::Config(format!("{name} coefficient must be positive")));
        }
        if !(self.exponent > 0.0 && self.exponent <= 1.0) {
            return Err(Error::Config(format!("{name} exponent must lie in (0, 1]")));
        }
        Ok(())
    }
}

pub fn stepsize(schedule: &StepSchedule, t: usize) -> f64 {
    schedule.coeff * ((t + 1) as f64).powf(-schedule.exponent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Actor step `α_t (φᵀθ_t) φ`.
    Ac,
    /// Actor step `α_t θ_t`.
    Nac,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(Algorithm::Ac),
            "nac" => Ok(Algorithm::Nac),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Ac => "ac",
            Algorithm::Nac => "nac",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub actor_schedule: StepSchedule,
    pub critic_schedule: StepSchedule,
    pub lambda: f64,
    /// Critic projection radius; `None` sizes it as `C_φ r_max / ((1−γ) λ)`.
    pub r_theta: Option<f64>,
    pub horizon: usize,
    /// Defaults to zero (the uniform policy).
    pub w0: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    /// Parameter snapshots are kept on logged steps that are multiples of this.
    pub log_stride: usize,
    /// Exact metrics are computed every `oracle_stride` steps and at the horizon.
    pub oracle_stride: usize,
}

impl RunConfig {
    /// Config with default coefficients for the exponents `(σ, ν)`.
    pub fn new(algorithm: Algorithm, sigma: f64, nu: f64, lambda: f64, horizon: usize) -> Self {
        Self {
            algorithm,
            actor_schedule: StepSchedule::new(DEFAULT_ACTOR_COEFF, sigma),
            critic_schedule: StepSchedule::new(DEFAULT_CRITIC_COEFF, nu),
            lambda,
            r_theta: None,
            horizon,
            w0: None,
            theta0: None,
            log_stride: 10 * DEFAULT_ORACLE_STRIDE,
            oracle_stride: DEFAULT_ORACLE_STRIDE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.actor_schedule.validate("actor")?;
        self.critic_schedule.validate("critic")?;
        if !(self.critic_schedule.exponent < self.actor_schedule.exponent) {
            return Err(Error::Config(format!(
                "critic exponent {} must be below actor exponent {}",
                self.critic_schedule.exponent, self.actor_schedule.exponent
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::BadLambda(self.lambda));
        }
        if let Some(r) = self.r_theta {
            if !(r > 0.0) {
                return Err(Error::Config("r_theta must be positive".into()));
            }
        }
        if self.log_stride == 0 || self.oracle_stride == 0 {
            return Err(Error::Config("strides must be positive".into()));
        }
        Ok(())
    }

    /// `R_θ`, either configured or auto-sized.
    pub fn radius(&self, map: &FeatureMap, mdp: &TabularMdp) -> f64 {
        self.r_theta.unwrap_or_else(|| {
            score_bound(map) * mdp.r_max() / ((1.0 - mdp.gamma()) * self.lambda)
        })
    }

    /// Actor stepsizes `α_0 … α_{T−1}`.
    pub fn actor_weights(&self) -> Vec<f64> {
        (0..self.horizon).map(|t| self.actor_schedule.at(t)).collect()
    }
}

/// `C_φ`: `√2` for the one-hot map, `2 max ‖x(s,a)‖` otherwise.
pub fn score_bound(map: &FeatureMap) -> f64 {
    if map.is_one_hot() {
        return std::f64::consts::SQRT_2;
    }
    let mut max = 0.0f64;
    for s in 0..map.n_states() {
        for a in 0..map.n_actions() {
            max = max.max(map.feature(s, a).iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    }
    2.0 * max
}

/// `(−φ(s,a)ᵀθ + Q̂) φ(s,a) − Q̂ φ(s,a') − λθ`, with `a'` drawn independently of `a`.
#[allow(clippy::too_many_arguments)]
pub fn critic_gradient(
    map: &FeatureMap,
    w: &DVector<f64>,
    theta: &DVector<f64>,
    s: usize,
    a: usize,
    a_prime: usize,
    q_hat: f64,
    lambda: f64,
) -> Result<DVector<f64>> {
    let phi = map.score(w, s, a)?;
    let phi_prime = map.score(w, s, a_prime)?;
    Ok(critic_gradient_from_scores(&phi, &phi_prime, theta, q_hat, lambda))
}

pub(crate) fn critic_gradient_from_scores(
    phi: &DVector<f64>,
    phi_prime: &DVector<f64>,
    theta: &DVector<f64>,
    q_hat: f64,
    lambda: f64,
) -> DVector<f64> {
    let residual = q_hat - phi.dot(theta);
    let mut g = theta * -lambda;
    g.axpy(residual, phi, 1.0);
    g.axpy(-q_hat, phi_prime, 1.0);
    g
}

/// Euclidean projection onto the ball of radius `r_theta`.
pub fn project_ball(theta: DVector<f64>, r_theta: f64) -> DVector<f64> {
    let norm = theta.norm();
    if norm <= r_theta {
        theta
    } else {
        theta * (r_theta / norm)
    }
}

/// Draws an index `i` with probability `weights[i] / Σ weights`.
pub fn sample_output_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::EmptyWeights);
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Config("output weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    Ok(sample_index(&probs, rng))
}

/// Metrics at one logged step. `w`/`theta` are present on snapshot steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub t: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `‖θ_t − θ^{λ*}_{w_t}‖²`.
    pub tracking_err: f64,
    /// `‖∇J(w_t)‖²`.
    pub grad_norm_sq: f64,
    /// `J* − J(w_t)`.
    pub opt_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<Vec<f64>>,
}

/// How many draws each sampler made during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub chain_states: usize,
    pub actions: usize,
    pub q_rollouts: usize,
    /// Actor updates whose score was evaluated at the critic's `(s_t, a_t)`.
    pub actor_steps_on_critic_pair: usize,
}

/// Exact metrics at the randomly selected output iterate `w_T̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputIterate {
    pub index: usize,
    pub w: Vec<f64>,
    pub grad_norm_sq: f64,
    pub opt_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateLog {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub r_theta: f64,
    pub j_opt: f64,
    pub records: Vec<IterateRecord>,
    pub final_w: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub output: Option<OutputIterate>,
    pub counts: SampleCounts,
}

pub const CSV_HEADER: &str = "t,alpha,beta,tracking_err,grad_norm_sq,opt_gap";

impl IterateLog {
    /// One line per logged step, columns as in [`CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t, r.alpha, r.beta, r.tracking_err, r.grad_norm_sq, r.opt_gap
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }

    pub fn record_at(&self, t: usize) -> Option<&IterateRecord> {
        self.records.iter().find(|r| r.t == t)
    }
}

fn vector_or_zero(v: &Option<Vec<f64>>, dim: usize, name: &str) -> Result<DVector<f64>> {
    match v {
        None => Ok(DVector::zeros(dim)),
        Some(v) if v.len() == dim => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Error::Config(format!("{name} has {} entries, expected {dim}", v.len()))),
    }
}

/// Runs `config.horizon` iterations of the two time-scale loop from `seed`.
///
/// The outer chain, the Q-sampling rollouts and the output-index draw use
/// disjoint generator streams of `seed`.
pub fn run(mdp: &TabularMdp, map: &FeatureMap, config: &RunConfig, seed: u64) -> Result<IterateLog> {
    config.validate()?;
    map.check_mdp(mdp)?;
    let dim = map.dim();
    let mut w = vector_or_zero(&config.w0, dim, "w0")?;
    let mut theta = vector_or_zero(&config.theta0, dim, "theta0")?;
    let r_theta = config.radius(map, mdp);
    let j_opt = optimal_value(mdp)?.j_opt;

    let mut chain_rng = rng::stream(seed, rng::CHAIN_STREAM);
    let mut rollout_rng = rng::stream(seed, rng::ROLLOUT_STREAM);
    let output_index = if config.horizon > 0 {
        let mut out_rng = rng::stream(seed, rng::OUTPUT_STREAM);
        Some(sample_output_index(&config.actor_weights(), &mut out_rng)?)
    } else {
        None
    };

    let mut records = Vec::new();
    let mut counts = SampleCounts::default();
    let mut output = None;
    let mut prev: Option<(usize, usize)> = None;

    for t in 0..=config.horizon {
        if t % config.oracle_stride == 0 || t == config.horizon {
            let oracle = tracking_oracle(map, mdp, &w, config.lambda)?;
            let snapshot = t % config.log_stride == 0 || t == config.horizon;
            records.push(IterateRecord {
                t,
                alpha: config.actor_schedule.at(t),
                beta: config.critic_schedule.at(t),
                tracking_err: (&theta - &oracle.theta_lambda_star).norm_squared(),
                grad_norm_sq: oracle.grad_j.norm_squared(),
                opt_gap: j_opt - oracle.j,
                w: snapshot.then(|| w.iter().copied().collect()),
                theta: snapshot.then(|| theta.iter().copied().collect()),
            });
        }
        if t == config.horizon {
            break;
        }
        if Some(t) == output_index {
            let oracle = tracking_oracle(map, mdp, &w, config.lambda)?;
            output = Some(OutputIterate {
                index: t,
                w: w.iter().copied().collect(),
                grad_norm_sq: oracle.grad_j.norm_squared(),
                opt_gap: j_opt - oracle.j,
            });
        }

        let s = match prev {
            None => sample_index(mdp.init_dist(), &mut chain_rng),
            Some((s_prev, a_prev)) => mdp.restart_kernel_step(s_prev, a_prev, &mut chain_rng)?,
        };
        counts.chain_states += 1;
        let policy = map.tabulate(&w);
        let a = policy.sample(s, &mut chain_rng);
        let a_prime = policy.sample(s, &mut chain_rng);
        counts.actions += 2;
        let q_hat = q_sample(mdp, &policy, s, a, &mut rollout_rng)?.q_hat;
        counts.q_rollouts += 1;

        let probs = policy.probs(s);
        let phi = map.score_with_probs(probs, s, a);
        let phi_prime = map.score_with_probs(probs, s, a_prime);
        let alpha = config.actor_schedule.at(t);
        let beta = config.critic_schedule.at(t);

        let g = critic_gradient_from_scores(&phi, &phi_prime, &theta, q_hat, config.lambda);
        let next_theta = project_ball(&theta + g * beta, r_theta);
        match config.algorithm {
            Algorithm::Ac => {
                w.axpy(alpha * phi.dot(&theta), &phi, 1.0);
                counts.actor_steps_on_critic_pair += 1;
            }
            Algorithm::Nac => w.axpy(alpha, &theta, 1.0),
        }
        theta = next_theta;
        if w.iter().chain(theta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteIterate { step: t });
        }
        prev = Some((s, a));
    }

    Ok(IterateLog {
        algorithm: config.algorithm,
        seed,
        r_theta,
        j_opt,
        records,
        final_w: w.iter().copied().collect(),
        final_theta: theta.iter().copied().collect(),
        output,
        counts,
    })
}

/// Time average of the critic increment `g` along the restart chain with `(w, θ)`
/// frozen, returning per-component mean and standard error.
///
/// Standard errors use non-overlapping batch means (50 batches) to account for
/// chain autocorrelation.
pub fn critic_mean_field_estimate(
    mdp: &TabularMdp,
    map: &FeatureMap,
    w: &DVector<f64>,
    theta: &DVector<f64>,
    lambda: f64,
    steps: usize,
    seed: u64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    const BATCHES: usize = 50;
    let policy = map.tabulate(w);
    let scores = crate::oracle::all_scores(map, w);
    let na = mdp.n_actions();
    let mut chain_rng: SimRng = rng::stream(seed, rng::CHAIN_STREAM);
    let mut rollout_rng: SimRng = rng::stream(seed, rng::ROLLOUT_STREAM);
    let batch_len = (steps / BATCHES).max(1);
    let mut batch_means = Vec::with_capacity(BATCHES);
    let mut acc = DVector::zeros(map.dim());
    let mut in_batch = 0;
    let mut s = sample_index(mdp.init_dist(), &mut chain_rng);
    let mut first = true;
    let mut a_prev = 0;
    for _ in 0..batch_len * BATCHES {
        if !first {
            s = mdp.restart_kernel_step(s, a_prev, &mut chain_rng)?;
        }
        first = false;
        let a = policy.sample(s, &mut chain_rng);
        let a_prime = policy.sample(s, &mut chain_rng);
        let q_hat = q_sample(mdp, &policy, s, a, &mut rollout_rng)?.q_hat;
        acc += critic_gradient_from_scores(&scores[s * na + a], &scores[s * na + a_prime], theta, q_hat, lambda);
        in_batch += 1;
        if in_batch == batch_len {
            batch_means.push(std::mem::replace(&mut acc, DVector::zeros(map.dim())) / batch_len as f64);
            in_batch = 0;
        }
        a_prev = a;
    }
    let k = batch_means.len() as f64;
    let mean = batch_means.iter().fold(DVector::zeros(map.dim()), |m, b| m + b) / k;
    let var = batch_means
        .iter()
        .fold(DVector::zeros(map.dim()), |v: DVector<f64>, b| v + (b - &mean).map(|x| x * x))
        / (k - 1.0).max(1.0);
    let stderr = var.map(|v| (v / k).sqrt());
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn single_action() -> TabularMdp {
        TabularMdp::new(2, 1, vec![0.4, 0.6, 0.9, 0.1], vec![0.2, 0.1, 0.7, 0.3], 0.9, vec![0.5, 0.5], 1.0)
            .unwrap()
    }

    #[test]
    fn stepsize_values() {
        let s = StepSchedule::new(0.1, 0.6);
        assert_eq!(stepsize(&s, 0), 0.1);
        assert!((s.at(31) - 0.1 * 32f64.powf(-0.6)).abs() < 1e-16);
        assert!(s.at(10) > s.at(11));
    }

    #[test]
    fn regime_configs_validate() {
        RunConfig::new(Algorithm::Ac, 0.6, 0.4, 1e-3, 10).validate().unwrap();
        RunConfig::new(Algorithm::Nac, 0.75, 0.5, 1e-3, 10).validate().unwrap();
        assert!(RunConfig::new(Algorithm::Ac, 0.4, 0.6, 1e-3, 10).validate().is_err());
        assert!(RunConfig::new(Algorithm::Ac, 0.6, 0.4, 0.0, 10).validate().is_err());
    }

    #[test]
    fn critic_gradient_degenerate_cases() {
        let mdp = single_action();
        let map = FeatureMap::for_mdp(&mdp);
        let w = DVector::from_vec(vec![1.0, -1.0]);
        let theta = DVector::from_vec(vec![2.0, 3.0]);
        let g = critic_gradient(&map, &w, &theta, 1, 0, 0, 4.0, 0.1).unwrap();
        assert!((g - &theta * -0.1).norm() < 1e-15);

        let map = FeatureMap::one_hot(2, 2);
        let w = DVector::from_vec(vec![0.3, 0.1, -0.2, 0.5]);
        let g = critic_gradient(&map, &w, &DVector::zeros(4), 0, 1, 0, 0.0, 0.5).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn projection_examples() {
        let inside = DVector::from_vec(vec![0.3, 0.4]);
        assert_eq!(project_ball(inside.clone(), 1.0), inside);
        let out = project_ball(DVector::from_vec(vec![3.0, 4.0]), 1.0);
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn output_index_edge_cases() {
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(sample_output_index(&[0.7], &mut rng).unwrap(), 0);
        assert!(matches!(sample_output_index(&[], &mut rng), Err(Error::EmptyWeights)));
    }

    #[test]
    fn zero_horizon_is_empty_run() {
        let mdp = single_action();
        let map = FeatureMap::for_mdp(&mdp);
        let mut config = RunConfig::new(Algorithm::Ac, 0.6, 0.4, 0.1, 0);
        config.w0 = Some(vec![0.5, 0.25]);
        config.theta0 = Some(vec![1.0, -1.0]);
        let log = run(&mdp, &map, &config, 3).unwrap();
        assert_eq!(log.final_w, vec![0.5, 0.25]);
        assert_eq!(log.final_theta, vec![1.0, -1.0]);
        assert_eq!(log.counts, SampleCounts::default());
        assert!(log.output.is_none());
        // only the initial point is logged
        assert_eq!(log.records.len(), 1);
    }

    #[test]
    fn single_action_critic_contracts_in_closed_form() {
        let mdp = single_action();
        let map = FeatureMap::for_mdp(&mdp);
        let mut config = RunConfig::new(Algorithm::Ac, 0.6, 0.4, 0.2, 500);
        config.w0 = Some(vec![0.3, -0.7]);
        config.theta0 = Some(vec![2.0, -1.0]);
        config.oracle_stride = 1;
        config.log_stride = 1;
        let log = run(&mdp, &map, &config, 11).unwrap();
        let mut factor = 1.0;
        for r in &log.records {
            assert_eq!(r.w.as_deref(), Some(&[0.3, -0.7][..]));
            let norm = r.theta.as_ref().map(|th| th.iter().map(|x| x * x).sum::<f64>().sqrt()).unwrap();
            assert!((norm - 5f64.sqrt() * factor).abs() <= 1e-12);
            factor *= 1.0 - config.critic_schedule.at(r.t) * config.lambda;
        }
    }

    #[test]
    fn single_action_nac_from_zero_critic_stays_put() {
        let mdp = single_action();
        let map = FeatureMap::for_mdp(&mdp);
        let mut config = RunConfig::new(Algorithm::Nac, 0.75, 0.5, 0.2, 300);
        config.w0 = Some(vec![0.3, -0.7]);
        let log = run(&mdp, &map, &config, 4).unwrap();
        assert_eq!(log.final_w, vec![0.3, -0.7]);
        assert_eq!(log.final_theta, vec![0.0, 0.0]);
    }
}
