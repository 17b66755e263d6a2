//! Unbiased Monte-Carlo estimation of `Q_π(s,a)` with a random geometric horizon.
//!
//! The horizon `T` counts Bernoulli(1 − √γ) trials up to and including the
//! first success, so `P(T > t) = γ^{t/2}` and the `γ^{t/2}`-weighted rollout
//! sum has expectation `Σ_t γ^t E[r_t] = Q_π(s,a)`. Rollouts use the original
//! kernel `P`, never the restart kernel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, TabularPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSampleOutcome {
    pub q_hat: f64,
    pub horizon: usize,
}

/// Draws `T ∈ {1, 2, …}` with `P(T = k) = (√γ)^{k−1}(1 − √γ)`.
pub fn geometric_horizon<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::BadDiscount(gamma));
    }
    // inverse CDF: T = 1 + ⌊ln U / ln √γ⌋ with U in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let failures = (u.ln() / (0.5 * gamma.ln())).floor();
    Ok(1 + failures as usize)
}

/// Upper bound on `|q_hat|` for a given horizon, `r_max Σ_{t<T} γ^{t/2}`.
pub fn q_sample_bound(mdp: &TabularMdp, horizon: usize) -> f64 {
    let root = mdp.gamma().sqrt();
    mdp.r_max() * (1.0 - root.powi(horizon as i32)) / (1.0 - root)
}

/// One rollout of the geometric-horizon estimator from `(s, a)` under `policy`.
pub fn q_sample<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    s: usize,
    a: usize,
    rng: &mut R,
) -> Result<QSampleOutcome> {
    mdp.check_state(s)?;
    mdp.check_action(a)?;
    let horizon = geometric_horizon(mdp.gamma(), rng)?;
    let root = mdp.gamma().sqrt();
    let (mut state, mut action) = (s, a);
    let mut discount = 1.0;
    let mut q_hat = 0.0;
    for t in 0..horizon {
        let next = mdp.kernel_step(state, action, rng)?;
        q_hat += discount * mdp.reward(state, action, next);
        discount *= root;
        state = next;
        if t + 1 < horizon {
            action = policy.sample(state, rng);
        }
    }
    Ok(QSampleOutcome { q_hat, horizon })
}
