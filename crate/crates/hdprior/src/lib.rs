//! Bayesian generalized linear models with historical-data borrowing priors:
//! power priors, hierarchical and commensurate models, latent exchangeability,
//! and robust meta-analytic mixtures, sampled with a built-in NUTS sampler and
//! normalized by bridge sampling.

pub mod cli;
pub mod data;
pub mod error;
pub mod evidence;
pub mod formula;
pub mod glm;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod smooth;
pub mod survival;
pub mod transforms;

pub use error::{Error, Result};
