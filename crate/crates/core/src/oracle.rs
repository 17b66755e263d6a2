//! Exact, factorization-based computation of every analytic quantity the
//! stochastic algorithms are measured against.
//!
//! Conventions: pair vectors are indexed by `s * n_actions + a`; the
//! objective is the normalized discounted return `J(w) = (1−γ) ζᵀV_π`, whose
//! exact gradient is `E_ν[A_π φ_w]` with `ν` the normalized visitation measure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{DistributionVector, TabularMdp, TabularPolicy};
use crate::policy::FeatureMap;

/// Relative singular-value cutoff for the Fisher pseudoinverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Sup-norm stopping tolerance for value iteration.
pub const VALUE_ITERATION_TOL: f64 = 1e-12;

fn policy_kernel(mdp: &TabularMdp, policy: &TabularPolicy) -> DMatrix<f64> {
    let ns = mdp.n_states();
    DMatrix::from_fn(ns, ns, |s, next| {
        (0..mdp.n_actions())
            .map(|a| policy.prob(s, a) * mdp.prob(s, a, next))
            .sum()
    })
}

fn policy_reward(mdp: &TabularMdp, policy: &TabularPolicy) -> DVector<f64> {
    DVector::from_fn(mdp.n_states(), |s, _| {
        (0..mdp.n_actions())
            .map(|a| policy.prob(s, a) * mdp.expected_reward(s, a))
            .sum()
    })
}

/// Solves `(I − γP_π) V = r_π`.
pub fn state_values(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<DVector<f64>> {
    let ns = mdp.n_states();
    let system = DMatrix::identity(ns, ns) - policy_kernel(mdp, policy) * mdp.gamma();
    system
        .lu()
        .solve(&policy_reward(mdp, policy))
        .ok_or(Error::SingularSystem("policy evaluation"))
}

/// `Q(s,a) = Σ_{s'} P(s'|s,a)(r(s,a,s') + γV(s'))` and `A = Q − V`, both `|S| × |A|`.
pub fn action_values(mdp: &TabularMdp, values: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let q = DMatrix::from_fn(ns, na, |s, a| {
        (0..ns)
            .map(|next| mdp.prob(s, a, next) * (mdp.reward(s, a, next) + mdp.gamma() * values[next]))
            .sum()
    });
    let adv = DMatrix::from_fn(ns, na, |s, a| q[(s, a)] - values[s]);
    (q, adv)
}

/// Discounted state occupancy `d = (1−γ)(I − γP_πᵀ)^{-1} ζ`.
pub fn state_visitation(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<DVector<f64>> {
    let ns = mdp.n_states();
    let system = DMatrix::identity(ns, ns) - policy_kernel(mdp, policy).transpose() * mdp.gamma();
    let zeta = DVector::from_column_slice(mdp.init_dist());
    let d = system
        .lu()
        .solve(&zeta)
        .ok_or(Error::SingularSystem("visitation"))?;
    Ok(d * (1.0 - mdp.gamma()))
}

/// `ν(s,a) = d(s) π(a|s)`.
pub fn visitation_measure(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<DistributionVector> {
    let d = state_visitation(mdp, policy)?;
    let na = mdp.n_actions();
    let probs = (0..mdp.n_pairs())
        .map(|i| (d[i / na] * policy.prob(i / na, i % na)).max(0.0))
        .collect();
    Ok(DistributionVector { probs })
}

/// `J = (1−γ) ζᵀV_π`.
pub fn objective(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let v = state_values(mdp, policy)?;
    Ok(normalized_return(mdp, &v))
}

fn normalized_return(mdp: &TabularMdp, values: &DVector<f64>) -> f64 {
    (1.0 - mdp.gamma()) * mdp.init_dist().iter().zip(values.iter()).map(|(z, v)| z * v).sum::<f64>()
}

/// Scores `φ_w(s,a)` for every pair, in pair order.
pub fn all_scores(map: &FeatureMap, w: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(map.n_states() * map.n_actions());
    for s in 0..map.n_states() {
        let probs = map.action_probs(w, s);
        for a in 0..map.n_actions() {
            out.push(map.score_with_probs(&probs, s, a));
        }
    }
    out
}

/// Everything derived from one policy evaluation at `w`.
struct Evaluation {
    policy: TabularPolicy,
    values: DVector<f64>,
    q: DMatrix<f64>,
    adv: DMatrix<f64>,
    nu: DistributionVector,
    scores: Vec<DVector<f64>>,
}

impl Evaluation {
    fn new(map: &FeatureMap, mdp: &TabularMdp, w: &DVector<f64>) -> Result<Self> {
        map.check_mdp(mdp)?;
        map.check_params(w)?;
        let policy = map.tabulate(w);
        let values = state_values(mdp, &policy)?;
        let (q, adv) = action_values(mdp, &values);
        let nu = visitation_measure(mdp, &policy)?;
        let scores = all_scores(map, w);
        Ok(Self {
            policy,
            values,
            q,
            adv,
            nu,
            scores,
        })
    }

    fn gradient(&self, na: usize) -> DVector<f64> {
        let dim = self.scores[0].len();
        let mut grad = DVector::zeros(dim);
        for (i, phi) in self.scores.iter().enumerate() {
            let weight = self.nu.probs[i] * self.adv[(i / na, i % na)];
            if weight != 0.0 {
                grad.axpy(weight, phi, 1.0);
            }
        }
        grad
    }

    fn fisher(&self) -> DMatrix<f64> {
        let dim = self.scores[0].len();
        let mut f = DMatrix::zeros(dim, dim);
        for (phi, nu) in self.scores.iter().zip(&self.nu.probs) {
            if *nu != 0.0 {
                f.ger(*nu, phi, phi, 1.0);
            }
        }
        // exact symmetry
        (&f + f.transpose()) * 0.5
    }
}

/// `∇J(w) = Σ_{s,a} ν(s,a) A(s,a) φ_w(s,a)`.
pub fn policy_gradient(map: &FeatureMap, mdp: &TabularMdp, w: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Evaluation::new(map, mdp, w)?.gradient(mdp.n_actions()))
}

/// `F(w) = Σ_{s,a} ν(s,a) φφᵀ`.
pub fn fisher(map: &FeatureMap, mdp: &TabularMdp, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(Evaluation::new(map, mdp, w)?.fisher())
}

fn solve_regularized(f: &DMatrix<f64>, grad: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::BadLambda(lambda));
    }
    let n = f.nrows();
    let system = f + DMatrix::identity(n, n) * lambda;
    let theta = system
        .clone()
        .cholesky()
        .map(|c| c.solve(grad))
        .or_else(|| system.clone().lu().solve(grad))
        .ok_or(Error::SingularSystem("regularized critic fixed point"))?;
    let residual = (grad - &system * &theta).norm();
    if residual > 1e-10 * grad.norm().max(1.0) {
        return Err(Error::SingularSystem("regularized fixed point residual above 1e-10"));
    }
    Ok(theta)
}

/// `θ^{λ*} = (F + λI)^{-1} ∇J`, the zero of the critic mean field.
pub fn regularized_fixed_point(
    map: &FeatureMap,
    mdp: &TabularMdp,
    w: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::BadLambda(lambda));
    }
    let eval = Evaluation::new(map, mdp, w)?;
    solve_regularized(&eval.fisher(), &eval.gradient(mdp.n_actions()), lambda)
}

/// Minimum-norm least-squares solution of `F θ = b` with singular values below
/// `PINV_CUTOFF · σ_max` discarded.
pub fn pseudo_inverse_solve(f: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = f.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return DVector::zeros(f.ncols());
    }
    let cutoff = PINV_CUTOFF * sigma_max;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut x = DVector::zeros(f.ncols());
    for (k, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > cutoff {
            let coeff = u.column(k).dot(b) / sigma;
            x.axpy(coeff, &v_t.row(k).transpose(), 1.0);
        }
    }
    x
}

/// `θ* = F(w)† ∇J(w)`.
pub fn natural_direction(map: &FeatureMap, mdp: &TabularMdp, w: &DVector<f64>) -> Result<DVector<f64>> {
    let eval = Evaluation::new(map, mdp, w)?;
    Ok(pseudo_inverse_solve(&eval.fisher(), &eval.gradient(mdp.n_actions())))
}

/// `½ E_ν[(A − φᵀθ)²] + ½ λ‖θ‖²`, whose negative gradient is the critic mean field
/// `−(F + λI)θ + ∇J`.
pub fn critic_objective(
    map: &FeatureMap,
    mdp: &TabularMdp,
    w: &DVector<f64>,
    lambda: f64,
    theta: &DVector<f64>,
) -> Result<f64> {
    let eval = Evaluation::new(map, mdp, w)?;
    let na = mdp.n_actions();
    let fit: f64 = eval
        .scores
        .iter()
        .enumerate()
        .map(|(i, phi)| eval.nu.probs[i] * (eval.adv[(i / na, i % na)] - phi.dot(theta)).powi(2))
        .sum();
    Ok(0.5 * fit + 0.5 * lambda * theta.norm_squared())
}

/// Greedy-optimal solution of the MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub j_opt: f64,
    pub actions: Vec<usize>,
    pub values: Vec<f64>,
}

impl OptimalSolution {
    pub fn policy(&self, n_actions: usize) -> TabularPolicy {
        TabularPolicy::deterministic(n_actions, &self.actions)
    }
}

/// Value iteration to sup-norm change 1e-12, then a greedy policy with
/// lowest-index tie-breaking, evaluated exactly.
pub fn optimal_value(mdp: &TabularMdp) -> Result<OptimalSolution> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let backup = |v: &[f64], s: usize, a: usize| -> f64 {
        (0..ns)
            .map(|next| mdp.prob(s, a, next) * (mdp.reward(s, a, next) + mdp.gamma() * v[next]))
            .sum()
    };
    let mut v = vec![0.0; ns];
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| (0..na).map(|a| backup(&v, s, a)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let change = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        if change <= VALUE_ITERATION_TOL {
            break;
        }
    }
    let actions: Vec<usize> = (0..ns)
        .map(|s| {
            let q: Vec<f64> = (0..na).map(|a| backup(&v, s, a)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            q.iter().position(|x| *x >= best - 1e-10).unwrap_or(0)
        })
        .collect();
    let policy = TabularPolicy::deterministic(na, &actions);
    let values = state_values(mdp, &policy)?;
    Ok(OptimalSolution {
        j_opt: normalized_return(mdp, &values),
        actions,
        values: values.iter().copied().collect(),
    })
}

/// Closed-form smoothness constants of the objective and value functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub c_nu: f64,
    pub l_j: f64,
    pub l_q: f64,
    pub l_v: f64,
}

/// `C_ν = ½ C_π (1 + ⌈log_ρ κ^{-1}⌉ + 1/(1−ρ))`, `L_J = r_max/(1−γ) (4 C_ν C_φ + L_φ)`,
/// `L_Q = 2 r_max C_ν/(1−γ)`, `L_V = r_max (C_π + 2 C_ν)/(1−γ)`.
///
/// The ceiling term counts mixing steps and is floored at zero, which only
/// matters when `κ < 1`.
pub fn lipschitz_bounds(
    mdp: &TabularMdp,
    c_phi: f64,
    l_phi: f64,
    c_pi: f64,
    kappa: f64,
    rho: f64,
) -> Result<LipschitzBounds> {
    if !(rho > 0.0 && rho < 1.0 && kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::BadMixingConstants { kappa, rho });
    }
    let burn_in = ((1.0 / kappa).ln() / rho.ln()).ceil().max(0.0);
    let c_nu = 0.5 * c_pi * (1.0 + burn_in + 1.0 / (1.0 - rho));
    let scale = mdp.r_max() / (1.0 - mdp.gamma());
    Ok(LipschitzBounds {
        c_nu,
        l_j: scale * (4.0 * c_nu * c_phi + l_phi),
        l_q: 2.0 * scale * c_nu,
        l_v: scale * (c_pi + 2.0 * c_nu),
    })
}

/// Lipschitz constant of `w ↦ θ^{λ*}_w` as printed for the fixed-point drift
/// bound, with strong-convexity modulus `λ_P`. Reported, not asserted.
pub fn fixed_point_lipschitz(
    mdp: &TabularMdp,
    c_phi: f64,
    l_phi: f64,
    c_pi: f64,
    c_nu: f64,
    lambda_p: f64,
) -> f64 {
    mdp.r_max() / (lambda_p * (1.0 - mdp.gamma()))
        * (6.0 * c_phi * c_nu
            + l_phi
            + c_phi * c_pi
            + 2.0 * c_phi * c_phi / lambda_p * (l_phi + c_phi * c_nu))
}

/// Exact reference quantities for one `(mdp, w, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBundle {
    pub w: Vec<f64>,
    pub lambda: f64,
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub adv: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    pub j: f64,
    pub grad_j: Vec<f64>,
    pub fisher: Vec<Vec<f64>>,
    pub theta_lambda_star: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub j_opt: f64,
    /// `λ_min(F) + λ`.
    pub lambda_p: f64,
    /// `min_θ E_ν[(φᵀθ − A)²]`.
    pub compat_error: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl OracleBundle {
    pub fn compute(map: &FeatureMap, mdp: &TabularMdp, w: &DVector<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::BadLambda(lambda));
        }
        let eval = Evaluation::new(map, mdp, w)?;
        let na = mdp.n_actions();
        let grad = eval.gradient(na);
        let f = eval.fisher();
        let theta_lambda_star = solve_regularized(&f, &grad, lambda)?;
        let theta_star = pseudo_inverse_solve(&f, &grad);
        let compat_error = eval
            .scores
            .iter()
            .enumerate()
            .map(|(i, phi)| eval.nu.probs[i] * (phi.dot(&theta_star) - eval.adv[(i / na, i % na)]).powi(2))
            .sum();
        let lambda_min = f.clone().symmetric_eigenvalues().min();
        let _ = &eval.policy;
        Ok(Self {
            w: w.iter().copied().collect(),
            lambda,
            v: eval.values.iter().copied().collect(),
            q: rows(&eval.q),
            adv: rows(&eval.adv),
            nu: eval.nu.probs.clone(),
            j: normalized_return(mdp, &eval.values),
            grad_j: grad.iter().copied().collect(),
            fisher: rows(&f),
            theta_lambda_star: theta_lambda_star.iter().copied().collect(),
            theta_star: theta_star.iter().copied().collect(),
            j_opt: optimal_value(mdp)?.j_opt,
            lambda_p: lambda_min + lambda,
            compat_error,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }
}

/// The three oracle quantities logged along a trajectory.
#[derive(Debug, Clone)]
pub(crate) struct TrackingOracle {
    pub theta_lambda_star: DVector<f64>,
    pub grad_j: DVector<f64>,
    pub j: f64,
}

pub(crate) fn tracking_oracle(
    map: &FeatureMap,
    mdp: &TabularMdp,
    w: &DVector<f64>,
    lambda: f64,
) -> Result<TrackingOracle> {
    let eval = Evaluation::new(map, mdp, w)?;
    let grad_j = eval.gradient(mdp.n_actions());
    let theta_lambda_star = solve_regularized(&eval.fisher(), &grad_j, lambda)?;
    Ok(TrackingOracle {
        theta_lambda_star,
        grad_j,
        j: normalized_return(mdp, &eval.values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandit(rewards: &[f64]) -> TabularMdp {
        let na = rewards.len();
        TabularMdp::new(1, na, vec![1.0; na], rewards.to_vec(), 0.9, vec![1.0], 1.0).unwrap()
    }

    fn chain2() -> TabularMdp {
        TabularMdp::from_json_str(include_str!("../fixtures/chain2.json")).unwrap()
    }

    #[test]
    fn constant_reward_values() {
        let mdp = TabularMdp::new(1, 2, vec![1.0; 2], vec![0.5; 2], 0.9, vec![1.0], 1.0).unwrap();
        let policy = TabularPolicy::uniform(1, 2);
        let v = state_values(&mdp, &policy).unwrap();
        assert!((v[0] - 5.0).abs() < 1e-12);
        assert!((objective(&mdp, &policy).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_is_zero() {
        let mdp = chain2();
        let zero = TabularMdp::new(
            2,
            2,
            mdp.to_file_format().transition.into_iter().flatten().flatten().collect(),
            vec![0.0; 8],
            0.9,
            mdp.init_dist().to_vec(),
            1.0,
        )
        .unwrap();
        let policy = TabularPolicy::uniform(2, 2);
        assert_eq!(state_values(&zero, &policy).unwrap().norm(), 0.0);
        assert_eq!(objective(&zero, &policy).unwrap(), 0.0);
    }

    #[test]
    fn values_match_value_iteration_oracle() {
        let mdp = chain2();
        let policy = TabularPolicy::from_rows(vec![vec![0.3, 0.7], vec![0.8, 0.2]]).unwrap();
        let exact = state_values(&mdp, &policy).unwrap();
        // fixed-policy Bellman iteration
        let mut v = [0.0; 2];
        for _ in 0..2000 {
            let mut next = [0.0; 2];
            for (s, out) in next.iter_mut().enumerate() {
                for a in 0..2 {
                    for n in 0..2 {
                        *out += policy.prob(s, a) * mdp.prob(s, a, n) * (mdp.reward(s, a, n) + 0.9 * v[n]);
                    }
                }
            }
            v = next;
        }
        for s in 0..2 {
            assert!((v[s] - exact[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn bellman_consistency_and_single_action() {
        let mdp = chain2();
        let policy = TabularPolicy::from_rows(vec![vec![0.1, 0.9], vec![0.6, 0.4]]).unwrap();
        let v = state_values(&mdp, &policy).unwrap();
        let (q, _) = action_values(&mdp, &v);
        for s in 0..2 {
            let back: f64 = (0..2).map(|a| policy.prob(s, a) * q[(s, a)]).sum();
            assert!((back - v[s]).abs() < 1e-12);
        }
        let single = TabularMdp::new(2, 1, vec![0.4, 0.6, 0.9, 0.1], vec![0.2, 0.1, 0.7, 0.3], 0.9, vec![0.5, 0.5], 1.0)
            .unwrap();
        let policy = TabularPolicy::uniform(2, 1);
        let v = state_values(&single, &policy).unwrap();
        let (q, adv) = action_values(&single, &v);
        for s in 0..2 {
            assert!((q[(s, 0)] - v[s]).abs() < 1e-12);
            assert!(adv[(s, 0)].abs() < 1e-12);
        }
    }

    #[test]
    fn visitation_single_state_is_policy() {
        let mdp = bandit(&[0.1, 0.2, 0.3]);
        let policy = TabularPolicy::from_rows(vec![vec![0.5, 0.25, 0.25]]).unwrap();
        let nu = visitation_measure(&mdp, &policy).unwrap();
        assert_eq!(nu.probs.len(), 3);
        for (x, y) in nu.probs.iter().zip([0.5, 0.25, 0.25]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_reward_bandit_has_zero_gradient() {
        let mdp = bandit(&[0.4, 0.4]);
        let map = FeatureMap::for_mdp(&mdp);
        let w = DVector::from_vec(vec![3.0, -1.0]);
        assert!(policy_gradient(&map, &mdp, &w).unwrap().norm() < 1e-15);
    }

    #[test]
    fn single_action_fisher_and_gradient_vanish() {
        let mdp = TabularMdp::new(2, 1, vec![0.4, 0.6, 0.9, 0.1], vec![0.2, 0.1, 0.7, 0.3], 0.9, vec![0.5, 0.5], 1.0)
            .unwrap();
        let map = FeatureMap::for_mdp(&mdp);
        let w = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(fisher(&map, &mdp, &w).unwrap().norm(), 0.0);
        assert_eq!(policy_gradient(&map, &mdp, &w).unwrap().norm(), 0.0);
        assert_eq!(natural_direction(&map, &mdp, &w).unwrap().norm(), 0.0);
    }

    #[test]
    fn fisher_trace_identity() {
        let mdp = chain2();
        let map = FeatureMap::for_mdp(&mdp);
        let w = DVector::from_vec(vec![0.4, -0.3, 1.1, 0.2]);
        let f = fisher(&map, &mdp, &w).unwrap();
        let nu = visitation_measure(&mdp, &map.tabulate(&w)).unwrap();
        let expected: f64 = all_scores(&map, &w)
            .iter()
            .zip(&nu.probs)
            .map(|(phi, n)| n * phi.norm_squared())
            .sum();
        assert!((f.trace() - expected).abs() < 1e-12);
    }

    #[test]
    fn regularized_fixed_point_edge_cases() {
        let mdp = bandit(&[0.4, 0.4]);
        let map = FeatureMap::for_mdp(&mdp);
        let w = DVector::from_vec(vec![0.5, 0.0]);
        assert_eq!(regularized_fixed_point(&map, &mdp, &w, 0.1).unwrap().norm(), 0.0);
        assert!(matches!(
            regularized_fixed_point(&map, &mdp, &w, 0.0),
            Err(Error::BadLambda(_))
        ));

        let mdp = chain2();
        let map = FeatureMap::for_mdp(&mdp);
        let w = DVector::from_vec(vec![0.4, -0.3, 1.1, 0.2]);
        let grad = policy_gradient(&map, &mdp, &w).unwrap();
        let theta = regularized_fixed_point(&map, &mdp, &w, 1e9).unwrap();
        assert!(theta.norm() <= grad.norm() / 1e9);
    }

    #[test]
    fn optimal_value_simple_cases() {
        let mdp = bandit(&[0.2, 0.7, 0.7]);
        let opt = optimal_value(&mdp).unwrap();
        assert_eq!(opt.actions, vec![1]);
        assert!((opt.j_opt - 0.7).abs() < 1e-12);

        let flat = bandit(&[0.3, 0.3]);
        let opt = optimal_value(&flat).unwrap();
        assert_eq!(opt.actions, vec![0]);
        assert!((opt.j_opt - 0.3).abs() < 1e-12);
        assert!((opt.values[0] - 3.0).abs() < 1e-10);

        let single = TabularMdp::new(1, 1, vec![1.0], vec![0.6], 0.9, vec![1.0], 1.0).unwrap();
        let opt = optimal_value(&single).unwrap();
        let j = objective(&single, &TabularPolicy::uniform(1, 1)).unwrap();
        assert!((opt.j_opt - j).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_plug_in_limits() {
        let mdp = chain2();
        let b = lipschitz_bounds(&mdp, 1.4, 0.5, 0.0, 2.0, 0.5).unwrap();
        assert_eq!(b.c_nu, 0.0);
        assert!((b.l_j - 10.0 * 0.5).abs() < 1e-12);
        let b = lipschitz_bounds(&mdp, 1.0, 0.0, 0.8, 1.0, 1e-300).unwrap();
        assert!((b.c_nu - 0.8).abs() < 1e-12);
        assert!(matches!(
            lipschitz_bounds(&mdp, 1.0, 1.0, 1.0, 1.0, 1.0),
            Err(Error::BadMixingConstants { .. })
        ));
    }

    #[test]
    fn bundle_invariants_on_chain2() {
        let mdp = chain2();
        let map = FeatureMap::for_mdp(&mdp);
        let w = DVector::from_vec(vec![0.4, -0.3, 1.1, 0.2]);
        let b = OracleBundle::compute(&map, &mdp, &w, 1e-2).unwrap();
        let bound = mdp.r_max() / (1.0 - mdp.gamma());
        assert!(b.v.iter().all(|v| v.abs() <= bound));
        assert!(b.q.iter().flatten().all(|q| q.abs() <= bound));
        assert!(b.adv.iter().flatten().all(|a| a.abs() <= 2.0 * bound));
        assert!((b.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let j_from_v = 0.1 * mdp.init_dist().iter().zip(&b.v).map(|(z, v)| z * v).sum::<f64>();
        assert!((b.j - j_from_v).abs() < 1e-15);
        assert!(b.compat_error < 1e-20);
        assert!(b.j_opt >= b.j - 1e-10);
        let json = b.to_json();
        let back: OracleBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }
}
