//! Exact Gaussian-process regression over (configuration, task) inputs.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelError, KernelKind, KernelSpec};
use crate::space::{ConfigPoint, SpaceError, TaskValue};

/// Jitter levels tried in order when factorizing a Gram matrix.
pub const JITTER_SCHEDULE: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Posterior variances are clamped to at least this value.
pub const MIN_VARIANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("cannot fit a GP to an empty data set")]
    NoData,
    #[error("observation {index} has a non-finite or invalid field")]
    NonFinite { index: usize },
    #[error("observation cost must be positive, got {0}")]
    NonPositiveCost(f64),
    #[error("noise variance must be non-negative and finite, got {0}")]
    InvalidNoise(f64),
    #[error("Cholesky factorization failed even with jitter {max_jitter:e}")]
    Factorization { max_jitter: f64 },
    #[error("query has {actual} coordinates, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("an ensemble needs at least one member")]
    EmptyEnsemble,
    #[error("ensemble members were fitted on different data")]
    EnsembleDataMismatch,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// One evaluated query: configuration, task, objective and wall cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: ConfigPoint,
    pub t: TaskValue,
    pub y: f64,
    pub cost: f64,
}

impl Observation {
    pub fn new(x: ConfigPoint, t: TaskValue, y: f64, cost: f64) -> Result<Self, GpError> {
        if !y.is_finite() {
            return Err(GpError::NonFinite { index: 0 });
        }
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(GpError::NonPositiveCost(cost));
        }
        Ok(Self { x, t, y, cost })
    }

    /// Regression target for a GP of the given kind: `y` for objective
    /// models, `ln(cost)` for cost models.
    pub fn target(&self, kind: KernelKind) -> f64 {
        match kind {
            KernelKind::Objective => self.y,
            KernelKind::Cost => self.cost.ln(),
        }
    }
}

/// How regression targets are transformed before fitting a zero-mean GP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TargetScaling {
    Raw,
    #[default]
    Standardize,
}

/// Dense Cholesky factor of `A + jitter·I`, escalating jitter on failure.
pub(crate) fn cholesky_with_jitter(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    for &jitter in &JITTER_SCHEDULE {
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(c) = m.cholesky() {
            return Some((c.unpack(), jitter));
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct GpModel {
    spec: KernelSpec,
    noise_var: f64,
    data: Arc<[Observation]>,
    shift: f64,
    scale: f64,
    targets: DVector<f64>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// Fits a zero-mean GP directly to the untransformed targets.
    pub fn fit(data: &[Observation], spec: KernelSpec, noise_var: f64) -> Result<Self, GpError> {
        Self::fit_scaled(Arc::from(data.to_vec()), spec, noise_var, TargetScaling::Raw)
    }

    pub fn fit_scaled(
        data: Arc<[Observation]>,
        spec: KernelSpec,
        noise_var: f64,
        scaling: TargetScaling,
    ) -> Result<Self, GpError> {
        if data.is_empty() {
            return Err(GpError::NoData);
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(GpError::InvalidNoise(noise_var));
        }
        let d = spec.dim();
        for (index, o) in data.iter().enumerate() {
            if o.x.dim() != d {
                return Err(GpError::DimensionMismatch { expected: d, actual: o.x.dim() });
            }
            if !o.y.is_finite() || !(o.cost > 0.0 && o.cost.is_finite()) {
                return Err(GpError::NonFinite { index });
            }
        }
        let kind = spec.kind();
        let raw: Vec<f64> = data.iter().map(|o| o.target(kind)).collect();
        let (shift, scale) = match scaling {
            TargetScaling::Raw => (0.0, 1.0),
            TargetScaling::Standardize => standardization(&raw),
        };
        let targets = DVector::from_iterator(raw.len(), raw.iter().map(|v| (v - shift) / scale));

        let mut gram = gram_matrix(&data, &spec);
        for i in 0..gram.nrows() {
            gram[(i, i)] += noise_var;
        }
        let (chol, jitter) = cholesky_with_jitter(&gram).ok_or(GpError::Factorization {
            max_jitter: JITTER_SCHEDULE[JITTER_SCHEDULE.len() - 1],
        })?;
        let w = chol.solve_lower_triangular(&targets).expect("non-singular factor");
        let alpha = chol.transpose().solve_upper_triangular(&w).expect("non-singular factor");
        Ok(Self { spec, noise_var, data, shift, scale, targets, chol, alpha, jitter })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn data(&self) -> &Arc<[Observation]> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Lower-triangular factor of the regularized Gram matrix.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Targets after scaling, i.e. the values the zero-mean GP sees.
    pub fn latent_targets(&self) -> &DVector<f64> {
        &self.targets
    }

    /// `(shift, scale)` such that `target = shift + scale · latent`.
    pub fn scaling(&self) -> (f64, f64) {
        (self.shift, self.scale)
    }

    /// `K + (σ² + jitter)·I` rebuilt from the data.
    pub fn regularized_gram(&self) -> DMatrix<f64> {
        let mut g = gram_matrix(&self.data, &self.spec);
        for i in 0..g.nrows() {
            g[(i, i)] += self.noise_var + self.jitter;
        }
        g
    }

    pub(crate) fn cross_cov(&self, x: &[f64], t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.data.len(),
            self.data.iter().map(|o| self.spec.eval_unchecked(o.x.coords(), o.t.value(), x, t)),
        )
    }

    /// `L⁻¹ k(X, q)` for a query.
    pub(crate) fn whitened_cross_cov(&self, x: &[f64], t: f64) -> DVector<f64> {
        let k = self.cross_cov(x, t);
        self.chol.solve_lower_triangular(&k).expect("non-singular factor")
    }

    fn check_query(&self, x: &ConfigPoint) -> Result<(), GpError> {
        if x.dim() != self.spec.dim() {
            return Err(GpError::DimensionMismatch { expected: self.spec.dim(), actual: x.dim() });
        }
        Ok(())
    }

    /// Posterior mean and unclamped variance of the latent (scaled) function.
    pub(crate) fn latent_posterior(&self, x: &[f64], t: f64) -> (f64, f64) {
        let k = self.cross_cov(x, t);
        let mean = k.dot(&self.alpha);
        let w = self.chol.solve_lower_triangular(&k).expect("non-singular factor");
        let var = self.spec.prior_var(t) - w.norm_squared();
        (mean, var)
    }

    /// Posterior mean and variance in target units, with the variance
    /// clamped below at [`MIN_VARIANCE`].
    pub fn posterior(&self, x: &ConfigPoint, t: TaskValue) -> Result<(f64, f64), GpError> {
        self.check_query(x)?;
        let (m, v) = self.latent_posterior(x.coords(), t.value());
        Ok((
            self.shift + self.scale * m,
            (self.scale * self.scale * v).max(MIN_VARIANCE),
        ))
    }

    /// Same as [`posterior`](Self::posterior) but without the variance clamp.
    pub fn posterior_unclamped(&self, x: &ConfigPoint, t: TaskValue) -> Result<(f64, f64), GpError> {
        self.check_query(x)?;
        let (m, v) = self.latent_posterior(x.coords(), t.value());
        Ok((self.shift + self.scale * m, self.scale * self.scale * v))
    }

    /// Log marginal likelihood of the scaled targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.targets.len() as f64;
        let log_det_half: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * self.targets.dot(&self.alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

fn standardization(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 1e-12 {
        (mean, sd)
    } else {
        (mean, 1.0)
    }
}

pub(crate) fn gram_matrix(data: &[Observation], spec: &KernelSpec) -> DMatrix<f64> {
    let n = data.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let (xi, ti) = (data[i].x.coords(), data[i].t.value());
        for j in 0..=i {
            let v = spec.eval_unchecked(xi, ti, data[j].x.coords(), data[j].t.value());
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// A set of GPs on identical data with distinct hyperparameter draws.
#[derive(Debug, Clone)]
pub struct GpEnsemble {
    members: Vec<GpModel>,
}

impl GpEnsemble {
    pub fn new(members: Vec<GpModel>) -> Result<Self, GpError> {
        let first = members.first().ok_or(GpError::EmptyEnsemble)?;
        for m in &members[1..] {
            if !Arc::ptr_eq(m.data(), first.data()) && m.data()[..] != first.data()[..] {
                return Err(GpError::EnsembleDataMismatch);
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[GpModel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn data(&self) -> &Arc<[Observation]> {
        self.members[0].data()
    }

    pub fn kind(&self) -> KernelKind {
        self.members[0].spec().kind()
    }

    /// Posterior mean in target units, averaged over members.
    pub fn mean(&self, x: &ConfigPoint, t: TaskValue) -> Result<f64, GpError> {
        let mut acc = 0.0;
        for m in &self.members {
            acc += m.posterior(x, t)?.0;
        }
        Ok(acc / self.members.len() as f64)
    }
}
