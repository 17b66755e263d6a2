//! Two time-scale actor-critic (AC) and natural actor-critic (NAC) on finite
//! MDPs, paired with exact linear-algebra oracles for every quantity the
//! iterates are measured against.
//!
//! * [`mdp`]: tabular MDPs, the original and restart kernels, stationarity and mixing.
//! * [`policy`]: linear-softmax policies and their score function.
//! * [`oracle`]: exact values, visitation measure, gradient, Fisher matrix and critic fixed points.
//! * [`estimator`]: geometric-horizon Q-sampling.
//! * [`two_timescale`]: the simultaneous actor/critic loop.
//! * [`experiments`]: replications, rate fits and reports.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod mdp;
pub mod oracle;
pub mod par;
pub mod policy;
pub mod rng;
pub mod two_timescale;

pub use error::{Error, Result};
pub use mdp::{DistributionVector, Kernel, TabularMdp, TabularPolicy};
pub use policy::FeatureMap;
pub use two_timescale::{Algorithm, IterateLog, RunConfig, StepSchedule};

/// Fixture MDPs shipped with the crate.
pub mod fixtures {
    use crate::TabularMdp;

    pub const CHAIN2_JSON: &str = include_str!("../fixtures/chain2.json");
    pub const GRID4_JSON: &str = include_str!("../fixtures/grid4.json");

    /// 2 states, 2 actions, `γ = 0.9`.
    pub fn chain2() -> TabularMdp {
        TabularMdp::from_json_str(CHAIN2_JSON).expect("chain2 fixture is valid")
    }

    /// 4 states, 3 actions, `γ = 0.9`.
    pub fn grid4() -> TabularMdp {
        TabularMdp::from_json_str(GRID4_JSON).expect("grid4 fixture is valid")
    }
}
