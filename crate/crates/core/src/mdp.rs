//! Finite MDPs, the original and restart transition kernels, and chain diagnostics.
//!
//! Tensors are stored flat and row-major: `transition[(s * n_actions + a) * n_states + s']`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums of stochastic vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Power-iteration cap for stationary distributions.
pub const POWER_ITERATION_CAP: usize = 1_000_000;

/// Successive-iterate TV tolerance for power iteration.
pub const POWER_ITERATION_TOL: f64 = 1e-12;

/// Longest window of exact matrix powers used by [`mixing_constants`].
pub const MIXING_WINDOW_CAP: usize = 10_000;

/// `d(t)` values at or below this are recorded as exact mixing (zero).
const MIXING_FLOOR: f64 = 1e-13;

/// A probability vector over a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionVector {
    pub probs: Vec<f64>,
}

impl DistributionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probability_vector(&probs).map_err(Error::BadInitDist)?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on `index`.
    pub fn point(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total-variation distance, `½‖p − q‖₁`.
    pub fn tv(&self, other: &Self) -> f64 {
        total_variation(&self.probs, &other.probs)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }
}

/// `½‖p − q‖₁`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Inverse-CDF draw from a probability vector using one uniform variate.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u above the accumulated mass
    last_positive
}

fn check_probability_vector(p: &[f64]) -> std::result::Result<(), String> {
    if p.is_empty() {
        return Err("empty vector".into());
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {x} is negative or non-finite"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Which transition kernel drives a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `P(·|s,a)`.
    Original,
    /// `γ P(·|s,a) + (1−γ) ζ(·)`.
    Restart,
}

/// A finite discounted MDP with transition kernel `P`, reward `r(s,a,s')`,
/// discount `γ` and initial distribution `ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    init_dist: Vec<f64>,
    r_max: f64,
}

/// On-disk layout: row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
    pub gamma: f64,
    pub init_dist: Vec<f64>,
    pub r_max: f64,
}

impl TabularMdp {
    /// Builds and validates an MDP from flat row-major tensors.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        init_dist: Vec<f64>,
        r_max: f64,
    ) -> Result<Self> {
        let mdp = Self {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            init_dist,
            r_max,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Checks every structural invariant: stochastic rows, discount in (0,1),
    /// a probability vector for `ζ` and rewards bounded by `r_max`.
    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(Error::Shape("need at least one state and one action".into()));
        }
        if self.transition.len() != ns * na * ns || self.reward.len() != ns * na * ns {
            return Err(Error::Shape(format!(
                "transition/reward tensors must have {} entries",
                ns * na * ns
            )));
        }
        if self.init_dist.len() != ns {
            return Err(Error::Shape(format!(
                "init_dist has {} entries, expected {ns}",
                self.init_dist.len()
            )));
        }
        for s in 0..ns {
            for a in 0..na {
                let row = self.row(s, a);
                let sum: f64 = row.iter().sum();
                let bad_entry = row.iter().any(|p| !p.is_finite() || *p < 0.0);
                if bad_entry || (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::NonStochasticRow {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::BadDiscount(self.gamma));
        }
        check_probability_vector(&self.init_dist).map_err(Error::BadInitDist)?;
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(Error::Shape(format!("r_max must be positive, got {}", self.r_max)));
        }
        for s in 0..ns {
            for a in 0..na {
                for next in 0..ns {
                    let value = self.reward(s, a, next);
                    if !value.is_finite() || value.abs() > self.r_max {
                        return Err(Error::RewardOutOfRange {
                            state: s,
                            action: a,
                            next,
                            value,
                            r_max: self.r_max,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_file_format(file: MdpFile) -> Result<Self> {
        let (ns, na) = (file.n_states, file.n_actions);
        let flatten = |name: &str, t: Vec<Vec<Vec<f64>>>| -> Result<Vec<f64>> {
            if t.len() != ns || t.iter().any(|m| m.len() != na || m.iter().any(|r| r.len() != ns)) {
                return Err(Error::Shape(format!("{name} must be [{ns}][{na}][{ns}]")));
            }
            Ok(t.into_iter().flatten().flatten().collect())
        };
        let transition = flatten("transition", file.transition)?;
        let reward = flatten("reward", file.reward)?;
        Self::new(ns, na, transition, reward, file.gamma, file.init_dist, file.r_max)
    }

    pub fn to_file_format(&self) -> MdpFile {
        let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            flat.chunks(self.n_actions * self.n_states)
                .map(|m| m.chunks(self.n_states).map(<[f64]>::to_vec).collect())
                .collect()
        };
        MdpFile {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transition: nest(&self.transition),
            reward: nest(&self.reward),
            gamma: self.gamma,
            init_dist: self.init_dist.clone(),
            r_max: self.r_max,
        }
    }

    pub fn from_json_str(text: &str) -> std::result::Result<Self, JsonLoadError> {
        let file: MdpFile = serde_json::from_str(text).map_err(JsonLoadError::Parse)?;
        Self::from_file_format(file).map_err(JsonLoadError::Invalid)
    }

    /// Loads an MDP JSON document and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            JsonLoadError::Parse(source) => Error::Json {
                path: path.to_path_buf(),
                source,
            },
            JsonLoadError::Invalid(err) => err,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("MDP serializes")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn init_dist(&self) -> &[f64] {
        &self.init_dist
    }

    /// `P(·|s,a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.reward[(s * self.n_actions + a) * self.n_states + next]
    }

    /// Expected one-step reward `Σ_{s'} P(s'|s,a) r(s,a,s')`.
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        let start = (s * self.n_actions + a) * self.n_states;
        self.transition[start..start + self.n_states]
            .iter()
            .zip(&self.reward[start..start + self.n_states])
            .map(|(p, r)| p * r)
            .sum()
    }

    /// Flat index of the pair `(s, a)`.
    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                size: self.n_states,
            });
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                size: self.n_actions,
            });
        }
        Ok(())
    }

    /// Draws `s' ~ P(·|s,a)`.
    pub fn kernel_step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize> {
        self.check_state(s)?;
        self.check_action(a)?;
        Ok(sample_index(self.row(s, a), rng))
    }

    /// Draws `s' ~ γ P(·|s,a) + (1−γ) ζ`: a kernel step with probability `γ`,
    /// a restart from `ζ` otherwise.
    pub fn restart_kernel_step<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_state(s)?;
        self.check_action(a)?;
        let u: f64 = rng.random();
        if u < self.gamma {
            Ok(sample_index(self.row(s, a), rng))
        } else {
            Ok(sample_index(&self.init_dist, rng))
        }
    }

    /// Probability of `next` under the requested kernel.
    pub fn kernel_prob(&self, kernel: Kernel, s: usize, a: usize, next: usize) -> f64 {
        match kernel {
            Kernel::Original => self.prob(s, a, next),
            Kernel::Restart => {
                self.gamma * self.prob(s, a, next) + (1.0 - self.gamma) * self.init_dist[next]
            }
        }
    }
}

/// Why a JSON document did not produce an MDP.
#[derive(Debug)]
pub enum JsonLoadError {
    Parse(serde_json::Error),
    Invalid(Error),
}

impl std::fmt::Display for JsonLoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JsonLoadError::Parse(e) => write!(f, "{e}"),
            JsonLoadError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for JsonLoadError {}

/// A stationary policy given as one action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_actions == 0 || rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Shape("policy rows must be non-empty and equal length".into()));
        }
        for r in &rows {
            check_probability_vector(r).map_err(|e| Error::Shape(format!("policy row {e}")))?;
        }
        Ok(Self {
            n_actions,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    pub(crate) fn from_flat(n_actions: usize, probs: Vec<f64>) -> Self {
        Self { n_actions, probs }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::from_flat(n_actions, vec![1.0 / n_actions as f64; n_states * n_actions])
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self::from_flat(n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `π(·|s)`.
    pub fn probs(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.probs(s), rng)
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_actions != mdp.n_actions() || self.n_states() != mdp.n_states() {
            return Err(Error::Shape(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states(),
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// State-to-state transition matrix `M[s][s'] = Σ_a π(a|s) K(s'|s,a)`.
pub fn state_chain(mdp: &TabularMdp, policy: &TabularPolicy, kernel: Kernel) -> DMatrix<f64> {
    let ns = mdp.n_states();
    DMatrix::from_fn(ns, ns, |s, next| {
        (0..mdp.n_actions())
            .map(|a| policy.prob(s, a) * mdp.kernel_prob(kernel, s, a, next))
            .sum()
    })
}

/// Stationary distribution over `(s, a)` pairs of the restart-kernel chain
/// under `policy`. The index of `(s, a)` is `s * n_actions + a`.
pub fn stationary_state_action_distribution(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
) -> Result<DistributionVector> {
    stationary_state_action_distribution_for(mdp, policy, Kernel::Restart)
}

/// Power iteration on the `(s, a)` chain driven by `kernel` and `policy`,
/// started from `ζ × π`.
pub fn stationary_state_action_distribution_for(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    kernel: Kernel,
) -> Result<DistributionVector> {
    policy.check_against(mdp)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut marginal = mdp.init_dist().to_vec();
    let mut current = joint_with_policy(&marginal, policy);
    let mut next = vec![0.0; ns * na];
    for _ in 0..POWER_ITERATION_CAP {
        marginal.iter_mut().for_each(|m| *m = 0.0);
        for s in 0..ns {
            for a in 0..na {
                let mass = current[s * na + a];
                if mass == 0.0 {
                    continue;
                }
                for (s_next, m) in marginal.iter_mut().enumerate() {
                    *m += mass * mdp.kernel_prob(kernel, s, a, s_next);
                }
            }
        }
        for s in 0..ns {
            for a in 0..na {
                next[s * na + a] = marginal[s] * policy.prob(s, a);
            }
        }
        let change = total_variation(&current, &next);
        std::mem::swap(&mut current, &mut next);
        if change <= POWER_ITERATION_TOL {
            return Ok(DistributionVector { probs: current });
        }
    }
    Err(Error::NotErgodic(format!(
        "power iteration did not contract within {POWER_ITERATION_CAP} steps"
    )))
}

fn joint_with_policy(marginal: &[f64], policy: &TabularPolicy) -> Vec<f64> {
    let na = policy.n_actions();
    let mut joint = vec![0.0; marginal.len() * na];
    for (s, m) in marginal.iter().enumerate() {
        for a in 0..na {
            joint[s * na + a] = m * policy.prob(s, a);
        }
    }
    joint
}

/// Geometric-ergodicity constants `(κ, ρ)` with `d(t) ≤ κ ρ^t` on the
/// measured window, plus the window itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingConstants {
    pub kappa: f64,
    pub rho: f64,
    /// `d(t)` for `t = 0, 1, …`, `d(t) = sup_s TV(P(s_t ∈ ·|s_0 = s), χ)`.
    pub distances: Vec<f64>,
}

impl MixingConstants {
    pub fn bound(&self, t: usize) -> f64 {
        self.kappa * self.rho.powi(t as i32)
    }
}

/// Mixing constants for the restart-kernel state chain under `policy`.
pub fn mixing_constants(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<MixingConstants> {
    mixing_constants_for(mdp, policy, Kernel::Restart)
}

pub fn mixing_constants_for(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    kernel: Kernel,
) -> Result<MixingConstants> {
    policy.check_against(mdp)?;
    mixing_constants_of_chain(&state_chain(mdp, policy, kernel))
}

/// Stationary distribution of a row-stochastic matrix by a direct solve of
/// `χᵀ(M − I) = 0, Σχ = 1`.
pub fn chain_stationary(chain: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = chain.nrows();
    let mut system = chain.transpose() - DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotErgodic("stationary distribution is not unique".into()))?;
    if solution.iter().any(|x| !x.is_finite() || *x < -1e-9) {
        return Err(Error::NotErgodic("stationary solve is not a distribution".into()));
    }
    Ok(solution.map(|x| x.max(0.0)))
}

/// Fits `(κ, ρ)` to a state chain from exact matrix powers.
///
/// `d(t)` is computed until it falls below 1e-13 or the window cap is hit.
/// `ln ρ` is the least-squares slope of `ln d(t)` over the tail half of the
/// window; `κ` is then the smallest value making the bound hold at every
/// measured `t ≥ 0`.
pub fn mixing_constants_of_chain(chain: &DMatrix<f64>) -> Result<MixingConstants> {
    let n = chain.nrows();
    let chi = chain_stationary(chain)?;
    let sup_tv = |m: &DMatrix<f64>| -> f64 {
        (0..n)
            .map(|s| 0.5 * (0..n).map(|j| (m[(s, j)] - chi[j]).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut power = DMatrix::identity(n, n);
    let mut distances = vec![sup_tv(&power)];
    while distances.len() <= MIXING_WINDOW_CAP {
        power = &power * chain;
        let d = sup_tv(&power);
        if d <= MIXING_FLOOR {
            distances.push(0.0);
            break;
        }
        distances.push(d);
    }
    let last = *distances.last().unwrap();
    if last > 0.0 && distances.len() > MIXING_WINDOW_CAP && last > 0.5 * distances[1] {
        return Err(Error::NotErgodic(format!(
            "TV distance to stationarity stalls at {last:.3e}"
        )));
    }

    // t ≥ 1 with d(t) above the floor
    let decaying: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, d)| **d > 0.0)
        .map(|(t, d)| (t as f64, d.ln()))
        .collect();
    let rho = if decaying.len() >= 2 {
        let tail = &decaying[decaying.len() / 2..];
        let tail = if tail.len() >= 2 { tail } else { &decaying[decaying.len() - 2..] };
        let (slope, _) = least_squares_line(tail);
        slope.exp()
    } else if let Some(&(t, ln_d)) = decaying.first() {
        // a single positive distance: the slowest rate consistent with d(0)
        ((ln_d - distances[0].max(MIXING_FLOOR).ln()) / t).exp()
    } else {
        0.0
    };
    if !(rho < 1.0) {
        return Err(Error::NotErgodic(format!("fitted rate {rho} is not below one")));
    }
    let rho = rho.max(f64::MIN_POSITIVE.sqrt());
    let kappa = distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(t, d)| d / rho.powi(t as i32))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    Ok(MixingConstants {
        kappa,
        rho,
        distances,
    })
}

/// Ordinary least-squares line through `(x, y)` points, returning `(slope, intercept)`.
fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, mean_y - slope * mean_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_state() -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![0.0], 0.9, vec![1.0], 1.0).unwrap()
    }

    fn two_state(rows: [[f64; 2]; 2], init: [f64; 2]) -> TabularMdp {
        TabularMdp::new(2, 1, rows.concat(), vec![0.0; 4], 0.9, init.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn validate_accepts_identity_case() {
        one_state().validate().unwrap();
    }

    #[test]
    fn validate_rejects_short_row() {
        let err = TabularMdp::new(1, 1, vec![0.99], vec![0.0], 0.9, vec![1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::NonStochasticRow { state: 0, action: 0, .. }));
    }

    #[test]
    fn validate_rejects_discount_boundary() {
        for gamma in [1.0, 0.0, -0.1, f64::NAN] {
            let err = TabularMdp::new(1, 1, vec![1.0], vec![0.0], gamma, vec![1.0], 1.0).unwrap_err();
            assert!(matches!(err, Error::BadDiscount(_)));
        }
    }

    #[test]
    fn validate_rejects_bad_init_and_reward() {
        let err = TabularMdp::new(1, 1, vec![1.0], vec![0.0], 0.9, vec![0.5], 1.0).unwrap_err();
        assert!(matches!(err, Error::BadInitDist(_)));
        let err = TabularMdp::new(1, 1, vec![1.0], vec![1.5], 0.9, vec![1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::RewardOutOfRange { .. }));
    }

    #[test]
    fn zero_mass_init_is_allowed() {
        two_state([[0.5, 0.5], [0.5, 0.5]], [1.0, 0.0]).validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let mdp = two_state([[0.3, 0.7], [0.6, 0.4]], [0.25, 0.75]);
        let back = TabularMdp::from_json_str(&mdp.to_json_string()).unwrap();
        assert_eq!(mdp, back);
    }

    #[test]
    fn json_loader_validates() {
        let text = r#"{"n_states":1,"n_actions":1,"transition":[[[0.99]]],"reward":[[[0]]],
            "gamma":0.9,"init_dist":[1.0],"r_max":1.0}"#;
        assert!(matches!(
            TabularMdp::from_json_str(text),
            Err(JsonLoadError::Invalid(Error::NonStochasticRow { .. }))
        ));
    }

    #[test]
    fn kernel_step_deterministic_row_and_range() {
        let mdp = two_state([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(mdp.kernel_step(0, 0, &mut rng).unwrap(), 1);
            assert_eq!(mdp.kernel_step(1, 0, &mut rng).unwrap(), 0);
        }
        assert!(matches!(
            mdp.kernel_step(2, 0, &mut rng),
            Err(Error::IndexOutOfRange { what: "state", .. })
        ));
        assert!(matches!(
            mdp.restart_kernel_step(0, 1, &mut rng),
            Err(Error::IndexOutOfRange { what: "action", .. })
        ));
    }

    #[test]
    fn kernel_step_is_reproducible() {
        let mdp = two_state([[0.5, 0.5], [0.2, 0.8]], [0.5, 0.5]);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|i| mdp.kernel_step(i % 2, 0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn restart_on_single_state_stays_put() {
        let mdp = one_state();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| mdp.restart_kernel_step(0, 0, &mut rng).unwrap() == 0));
    }

    #[test]
    fn stationary_on_single_state_is_policy() {
        let mdp = TabularMdp::new(1, 3, vec![1.0; 3], vec![0.0; 3], 0.9, vec![1.0], 1.0).unwrap();
        let policy = TabularPolicy::from_rows(vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let nu = stationary_state_action_distribution(&mdp, &policy).unwrap();
        for (x, y) in nu.probs.iter().zip([0.2, 0.3, 0.5]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_chain_is_not_ergodic_under_original_kernel() {
        let mdp = two_state([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0]);
        let policy = TabularPolicy::uniform(2, 1);
        assert!(matches!(
            mixing_constants_for(&mdp, &policy, Kernel::Original),
            Err(Error::NotErgodic(_))
        ));
        assert!(matches!(
            stationary_state_action_distribution_for(&mdp, &policy, Kernel::Original),
            Err(Error::NotErgodic(_))
        ));
        // the restart mixture breaks the periodicity
        mixing_constants(&mdp, &policy).unwrap();
    }

    #[test]
    fn equal_rows_mix_in_one_step() {
        let chain = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5]);
        let mc = mixing_constants_of_chain(&chain).unwrap();
        assert!(mc.distances[1] <= 1e-15);
        assert!(mc.rho < 1e-100);
        assert!((mc.kappa - mc.distances[0]).abs() < 1e-15);
        assert!((mc.distances[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn doubly_stochastic_second_eigenvalue() {
        // eigenvalues 1 and 2p - 1 = 0.5
        let chain = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
        let mc = mixing_constants_of_chain(&chain).unwrap();
        assert!((0.45..=0.55).contains(&mc.rho), "rho = {}", mc.rho);
        for (t, d) in mc.distances.iter().enumerate() {
            assert!(*d <= mc.bound(t) * (1.0 + 1e-12) + 1e-300, "t = {t}");
        }
    }

    #[test]
    fn sample_index_skips_zero_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(sample_index(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
