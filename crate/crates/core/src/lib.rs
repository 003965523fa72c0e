//! Bayesian and frequentist random-effects meta-analysis under the
//! normal-normal hierarchical model
//!
//! ```text
//! θ_i ~ N(x_iᵀβ, τ²),   y_i ~ N(θ_i, s_i²),   s_i known
//! ```
//!
//! Everything conditional on the heterogeneity `τ` is closed form
//! ([`gls_fit`]). Bayesian inference integrates over the posterior of `τ`
//! ([`build_posterior`], [`TauPosterior::marginal_effects`]); frequentist
//! inference plugs in a point estimate ([`blup`]) and reports a Q-profile
//! interval ([`q_profile_ci`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod csvio;
pub mod data;
pub mod datasets;
pub mod error;
pub mod frequentist;
mod linalg;
pub mod mixture;
pub mod nnhm;
mod optimize;
pub mod posterior;
pub mod prior;
mod quadrature;
pub mod special;

pub use data::{Contrast, Dataset, DesignMatrix, INTERCEPT};
pub use error::{Error, Result};
pub use frequentist::{
    blup, estimate_tau, log_likelihood, q_profile_ci, q_statistic, Estimator, FreqResult, QProfile,
};
pub use mixture::NormalMixture;
pub use nnhm::{
    conditional_contrast, gls_fit, infinite_tau_limits, predict_new_study, ConditionalFit,
    InfiniteTauLimits,
};
pub use posterior::{
    build_posterior, leave_one_out, marginal_effect, IntervalMethod, MarginalSummary,
    MarginalTarget, TauPosterior,
};
pub use prior::{dumouchel_default_scale, HeterogeneityPrior, PriorSpec};
pub use special::chi2_quantile;
