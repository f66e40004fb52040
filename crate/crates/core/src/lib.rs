//! Cost-aware multi-task Bayesian optimization that tunes model
//! hyperparameters jointly with the presample size of importance-sampled
//! SGD.

pub mod acquisition;
pub mod gp;
pub mod kernels;
pub mod mcmc;
pub mod rng;
pub mod space;
pub mod dataset;
pub mod trainer;
pub mod problems;
pub mod engine;
pub mod reporting;
