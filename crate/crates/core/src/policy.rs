//! Linear-softmax policies `π_w(a|s) ∝ exp(wᵀx(s,a))` and their score function.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{sample_index, total_variation, DistributionVector, TabularMdp, TabularPolicy};

/// Feature vectors `x(s,a) ∈ ℝ^d`, stored row-major by pair index `s * n_actions + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    features: Vec<f64>,
}

impl FeatureMap {
    pub fn new(n_states: usize, n_actions: usize, dim: usize, features: Vec<f64>) -> Result<Self> {
        if dim == 0 || features.len() != n_states * n_actions * dim {
            return Err(Error::Shape(format!(
                "feature tensor must hold {n_states}x{n_actions}x{dim} entries"
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Shape("features must be finite".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            dim,
            features,
        })
    }

    /// Tabular map: `d = |S||A|`, `x(s,a) = e_(s,a)`.
    pub fn one_hot(n_states: usize, n_actions: usize) -> Self {
        let dim = n_states * n_actions;
        let mut features = vec![0.0; dim * dim];
        for i in 0..dim {
            features[i * dim + i] = 1.0;
        }
        Self {
            n_states,
            n_actions,
            dim,
            features,
        }
    }

    pub fn for_mdp(mdp: &TabularMdp) -> Self {
        Self::one_hot(mdp.n_states(), mdp.n_actions())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn is_one_hot(&self) -> bool {
        *self == Self::one_hot(self.n_states, self.n_actions)
    }

    pub fn feature(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.dim;
        &self.features[start..start + self.dim]
    }

    fn logits(&self, w: &DVector<f64>, s: usize) -> Vec<f64> {
        (0..self.n_actions)
            .map(|a| self.feature(s, a).iter().zip(w.iter()).map(|(x, w)| x * w).sum())
            .collect()
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                size: self.n_states,
            });
        }
        Ok(())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                size: self.n_actions,
            });
        }
        Ok(())
    }

    /// Softmax over `{wᵀx(s,a)}_a`, max-subtracted.
    pub fn action_distribution(&self, w: &DVector<f64>, s: usize) -> Result<DistributionVector> {
        self.check_state(s)?;
        Ok(DistributionVector {
            probs: self.action_probs(w, s),
        })
    }

    pub(crate) fn action_probs(&self, w: &DVector<f64>, s: usize) -> Vec<f64> {
        softmax(&self.logits(w, s))
    }

    /// `log π_w(a|s)` via log-sum-exp.
    pub fn log_prob(&self, w: &DVector<f64>, s: usize, a: usize) -> Result<f64> {
        self.check_state(s)?;
        self.check_action(a)?;
        let logits = self.logits(w, s);
        Ok(logits[a] - log_sum_exp(&logits))
    }

    /// `φ_w(s,a) = x(s,a) − Σ_{a'} π_w(a'|s) x(s,a')`.
    pub fn score(&self, w: &DVector<f64>, s: usize, a: usize) -> Result<DVector<f64>> {
        self.check_state(s)?;
        self.check_action(a)?;
        let probs = self.action_probs(w, s);
        Ok(self.score_with_probs(&probs, s, a))
    }

    pub(crate) fn score_with_probs(&self, probs: &[f64], s: usize, a: usize) -> DVector<f64> {
        let mut phi = DVector::from_column_slice(self.feature(s, a));
        for (b, p) in probs.iter().enumerate() {
            if *p != 0.0 {
                for (out, x) in phi.iter_mut().zip(self.feature(s, b)) {
                    *out -= p * x;
                }
            }
        }
        phi
    }

    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        w: &DVector<f64>,
        s: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_state(s)?;
        Ok(sample_index(&self.action_probs(w, s), rng))
    }

    /// The full table `π_w(·|s)` for every state.
    pub fn tabulate(&self, w: &DVector<f64>) -> TabularPolicy {
        let probs = (0..self.n_states)
            .flat_map(|s| self.action_probs(w, s))
            .collect();
        TabularPolicy::from_flat(self.n_actions, probs)
    }

    pub(crate) fn check_params(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::Shape(format!(
                "parameter has {} entries, feature dimension is {}",
                w.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn check_mdp(&self, mdp: &TabularMdp) -> Result<()> {
        if mdp.n_states() != self.n_states || mdp.n_actions() != self.n_actions {
            return Err(Error::Shape(format!(
                "feature map is {}x{}, MDP is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Empirical constants for the smoothness and boundedness of the softmax class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Largest `‖φ_w(s,a)‖` seen over all pairs and sampled parameters.
    pub c_phi: f64,
    /// `√2` for the one-hot map, where `‖e_(s,a) − E_π e‖² ≤ 2`.
    pub c_phi_analytic: Option<f64>,
    /// Max of `‖φ_w − φ_w'‖ / ‖w − w'‖` over sampled pairs and `(s,a)`.
    pub l_phi_hat: f64,
    /// Max of `TV(π_w(·|s), π_w'(·|s)) / ‖w − w'‖` over sampled pairs and states.
    pub c_pi_hat: f64,
    pub n_pairs: usize,
    pub radius: f64,
}

/// Uniform draw from the Euclidean ball of the given radius.
pub fn sample_in_ball<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> DVector<f64> {
    let direction = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = direction.norm();
    let u: f64 = rng.random();
    if norm == 0.0 {
        return DVector::zeros(dim);
    }
    direction * (radius * u.powf(1.0 / dim as f64) / norm)
}

/// Estimates the score bound and the two Lipschitz ratios from `n_pairs`
/// parameter pairs drawn uniformly inside the ball of `radius`.
///
/// Maxima are taken over a prefix-stable draw sequence, so for a fixed seed the
/// report is nondecreasing in `n_pairs`.
pub fn assumption_constants<R: Rng + ?Sized>(
    map: &FeatureMap,
    mdp: &TabularMdp,
    n_pairs: usize,
    radius: f64,
    rng: &mut R,
) -> Result<AssumptionReport> {
    map.check_mdp(mdp)?;
    if n_pairs == 0 {
        return Err(Error::Config("n_pairs must be at least 1".into()));
    }
    let (ns, na) = (map.n_states(), map.n_actions());
    let mut report = AssumptionReport {
        c_phi: 0.0,
        c_phi_analytic: map.is_one_hot().then_some(std::f64::consts::SQRT_2),
        l_phi_hat: 0.0,
        c_pi_hat: 0.0,
        n_pairs,
        radius,
    };
    for _ in 0..n_pairs {
        let w = sample_in_ball(map.dim(), radius, rng);
        let w2 = sample_in_ball(map.dim(), radius, rng);
        let dist = (&w - &w2).norm();
        for s in 0..ns {
            let p = map.action_probs(&w, s);
            let p2 = map.action_probs(&w2, s);
            for a in 0..na {
                let phi = map.score_with_probs(&p, s, a);
                let phi2 = map.score_with_probs(&p2, s, a);
                report.c_phi = report.c_phi.max(phi.norm()).max(phi2.norm());
                if dist > 0.0 {
                    report.l_phi_hat = report.l_phi_hat.max((phi - phi2).norm() / dist);
                }
            }
            if dist > 0.0 {
                report.c_pi_hat = report.c_pi_hat.max(total_variation(&p, &p2) / dist);
            }
        }
    }
    Ok(report)
}
