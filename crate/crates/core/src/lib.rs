//! Bayesian model uncertainty with dimension-adjusted model priors.
//!
//! Posterior model probabilities are computed either exactly (normal
//! linear models with normal-inverse-gamma priors) or by Laplace
//! approximation (generalized linear models, log-linear contingency-table
//! models), and can be estimated by reversible-jump MCMC when the model
//! space is too large to enumerate.

pub mod averaging_shrinkage;
pub mod error;
pub mod glm_laplace;
pub mod linalg;
pub mod linear_exact;
pub mod marginal;
pub mod model_space;
pub mod param_priors;
pub mod rj_sampler;
pub mod special;

pub use error::{Error, Result};
