//! Hyperparameter marginalization by univariate slice sampling.
//!
//! Each GP hyperparameter (one lengthscale per input dimension, the
//! amplitude and the noise variance) is sampled in log space with a
//! log-normal prior truncated to a finite support. One sweep updates every
//! coordinate once with Neal's stepping-out and shrinkage procedure.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{GpEnsemble, GpError, GpModel, Observation, TargetScaling};
use crate::kernels::{KernelKind, KernelSpec};
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McmcError {
    #[error("prior for {name} is invalid: {reason}")]
    InvalidPrior { name: &'static str, reason: String },
    #[error("MCMC needs at least one observation")]
    NoData,
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("no hyperparameter setting in the prior support yields a valid GP")]
    NoValidStart,
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Normal prior on `ln θ`, truncated to `[log_lower, log_upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub log_mean: f64,
    pub log_sd: f64,
    pub log_lower: f64,
    pub log_upper: f64,
}

impl LogNormalPrior {
    pub fn new(log_mean: f64, log_sd: f64, lower: f64, upper: f64) -> Self {
        Self { log_mean, log_sd, log_lower: lower.ln(), log_upper: upper.ln() }
    }

    fn validate(&self, name: &'static str) -> Result<(), McmcError> {
        let invalid = |reason: &str| McmcError::InvalidPrior { name, reason: reason.to_string() };
        if !(self.log_sd > 0.0 && self.log_sd.is_finite()) {
            return Err(invalid("log_sd must be positive"));
        }
        if !self.log_mean.is_finite() || !self.log_lower.is_finite() || !self.log_upper.is_finite() {
            return Err(invalid("parameters must be finite"));
        }
        if !(self.log_lower < self.log_upper) {
            return Err(invalid("support is empty"));
        }
        Ok(())
    }

    fn log_density(&self, v: f64) -> f64 {
        if v < self.log_lower || v > self.log_upper {
            return f64::NEG_INFINITY;
        }
        let z = (v - self.log_mean) / self.log_sd;
        -0.5 * z * z
    }

    fn start(&self) -> f64 {
        self.log_mean.clamp(self.log_lower, self.log_upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub lengthscale: LogNormalPrior,
    pub amplitude: LogNormalPrior,
    pub noise: LogNormalPrior,
}

impl Default for HyperPriors {
    fn default() -> Self {
        Self {
            lengthscale: LogNormalPrior::new(0.0, 1.0, 1e-3, 1e2),
            amplitude: LogNormalPrior::new(0.0, 1.0, 1e-3, 1e2),
            noise: LogNormalPrior::new(1e-3f64.ln(), 2.0, 1e-8, 10.0),
        }
    }
}

impl HyperPriors {
    pub fn validate(&self) -> Result<(), McmcError> {
        self.lengthscale.validate("lengthscale")?;
        self.amplitude.validate("amplitude")?;
        self.noise.validate("noise")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub n_samples: usize,
    /// Initial slice bracket width in log space.
    pub step_width: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { burn_in: 50, thin: 3, n_samples: 10, step_width: 1.0 }
    }
}

/// One univariate slice-sampling update (stepping out, then shrinkage)
/// of `x0` under the unnormalized log density `log_f` on `[lower, upper]`.
pub fn slice_sample_1d<F: FnMut(f64) -> f64>(
    x0: f64,
    mut log_f: F,
    width: f64,
    lower: f64,
    upper: f64,
    rng: &mut Rng,
) -> f64 {
    const MAX_STEPS: usize = 32;
    let f0 = log_f(x0);
    let level = f0 + rng.random::<f64>().ln();

    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let mut j = (MAX_STEPS as f64 * rng.random::<f64>()) as usize;
    let mut k = MAX_STEPS - 1 - j;
    while j > 0 && left > lower && log_f(left) > level {
        left -= width;
        j -= 1;
    }
    while k > 0 && right < upper && log_f(right) > level {
        right += width;
        k -= 1;
    }
    left = left.max(lower);
    right = right.min(upper);

    loop {
        let x1 = left + rng.random::<f64>() * (right - left);
        if log_f(x1) > level {
            return x1;
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left < 1e-12 {
            return x0;
        }
    }
}

struct Posterior<'a> {
    data: Arc<[Observation]>,
    kind: KernelKind,
    priors: &'a HyperPriors,
    dim: usize,
}

impl Posterior<'_> {
    fn build(&self, theta: &[f64]) -> Result<(KernelSpec, f64), GpError> {
        let ls = theta[..self.dim].iter().map(|v| v.exp()).collect();
        let spec = KernelSpec::with_kind(self.kind, ls, theta[self.dim].exp())?;
        Ok((spec, theta[self.dim + 1].exp()))
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let mut lp = 0.0;
        for &v in &theta[..self.dim] {
            lp += self.priors.lengthscale.log_density(v);
        }
        lp + self.priors.amplitude.log_density(theta[self.dim]) + self.priors.noise.log_density(theta[self.dim + 1])
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let lp = self.log_prior(theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        let Ok((spec, noise)) = self.build(theta) else {
            return f64::NEG_INFINITY;
        };
        match GpModel::fit_scaled(self.data.clone(), spec, noise, TargetScaling::Standardize) {
            Ok(gp) => {
                let l = gp.log_marginal_likelihood();
                if l.is_finite() {
                    l + lp
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn support(&self, i: usize) -> (f64, f64) {
        let p = if i < self.dim {
            &self.priors.lengthscale
        } else if i == self.dim {
            &self.priors.amplitude
        } else {
            &self.priors.noise
        };
        (p.log_lower, p.log_upper)
    }
}

/// Draws `cfg.n_samples` hyperparameter settings from the posterior
/// `p(θ | data) ∝ LML(θ) · prior(θ)` of a GP of the given kind.
pub fn sample_hyperparams_mcmc(
    data: &Arc<[Observation]>,
    kind: KernelKind,
    priors: &HyperPriors,
    cfg: &McmcConfig,
    rng: &mut Rng,
) -> Result<Vec<(KernelSpec, f64)>, McmcError> {
    priors.validate()?;
    if data.is_empty() {
        return Err(McmcError::NoData);
    }
    if cfg.n_samples == 0 {
        return Err(McmcError::NoSamples);
    }
    let dim = data[0].x.dim();
    let post = Posterior { data: data.clone(), kind, priors, dim };

    let mut theta: Vec<f64> = (0..dim)
        .map(|_| priors.lengthscale.start())
        .chain([priors.amplitude.start(), priors.noise.start()])
        .collect();
    if !post.log_density(&theta).is_finite() {
        // Larger noise always regularizes the Gram matrix.
        theta[dim + 1] = priors.noise.log_upper;
        if !post.log_density(&theta).is_finite() {
            return Err(McmcError::NoValidStart);
        }
    }

    let thin = cfg.thin.max(1);
    let total = cfg.burn_in + thin * cfg.n_samples;
    let mut draws = Vec::with_capacity(cfg.n_samples);
    for sweep in 0..total {
        for i in 0..theta.len() {
            let (lo, hi) = post.support(i);
            let mut work = theta.clone();
            let x0 = theta[i];
            theta[i] = slice_sample_1d(
                x0,
                |v| {
                    work[i] = v;
                    post.log_density(&work)
                },
                cfg.step_width,
                lo,
                hi,
                rng,
            );
        }
        if sweep >= cfg.burn_in && (sweep + 1 - cfg.burn_in) % thin == 0 {
            draws.push(post.build(&theta)?);
        }
    }
    Ok(draws)
}

/// Samples hyperparameters and fits one standardized GP per draw.
pub fn fit_ensemble(
    data: Arc<[Observation]>,
    kind: KernelKind,
    priors: &HyperPriors,
    cfg: &McmcConfig,
    rng: &mut Rng,
) -> Result<GpEnsemble, McmcError> {
    let draws = sample_hyperparams_mcmc(&data, kind, priors, cfg, rng)?;
    let members = draws
        .into_iter()
        .map(|(spec, noise)| GpModel::fit_scaled(data.clone(), spec, noise, TargetScaling::Standardize))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GpEnsemble::new(members)?)
}
