//! Entropy-search acquisition over a GP ensemble.
//!
//! The distribution of the minimizer at the target task is discretized on
//! a set of representer points and estimated by Monte Carlo: joint
//! posterior samples over the representers are drawn and the argmin of
//! each sample is counted. The value of a query is the expected drop in
//! entropy of that distribution after conditioning on a fantasized
//! observation. Conditioning on one observation is a rank-one downdate of
//! the representer covariance, so every fantasy reuses the same standard
//! normal draws (common random numbers) and a query that carries no
//! information about the representers scores exactly zero.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::gp::{cholesky_with_jitter, GpEnsemble, GpError, GpModel};
use crate::rng::{fork, Rng};
use crate::space::{ConfigPoint, SearchSpace, SpaceError, TaskValue};

/// Floor on representer selection weights, keeping every candidate eligible.
pub const EI_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquisitionError {
    #[error("acquisition setting `{0}` must be at least 1")]
    ZeroCount(&'static str),
    #[error("task grid must contain at least one value in [0, 1]")]
    BadTaskGrid,
    #[error("cannot pick {wanted} representers from {available} candidates")]
    TooFewCandidates { wanted: usize, available: usize },
    #[error("representer set is empty")]
    NoRepresenters,
    #[error("joint posterior covariance over representers is not factorizable")]
    Factorization,
    #[error("objective and cost ensembles were fitted on different configurations")]
    MismatchedEnsembles,
    #[error("probabilities must be non-negative and sum to 1")]
    InvalidProbabilities,
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub n_representers: usize,
    pub n_mc: usize,
    pub n_fantasy: usize,
    pub n_candidates: usize,
    /// Normalized task values paired with every random candidate.
    pub task_grid: Vec<f64>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            n_representers: 50,
            n_mc: 200,
            n_fantasy: 10,
            n_candidates: 500,
            task_grid: vec![1.0],
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        for (name, v) in [
            ("n_representers", self.n_representers),
            ("n_mc", self.n_mc),
            ("n_fantasy", self.n_fantasy),
            ("n_candidates", self.n_candidates),
        ] {
            if v == 0 {
                return Err(AcquisitionError::ZeroCount(name));
            }
        }
        if self.task_grid.is_empty() || self.task_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(AcquisitionError::BadTaskGrid);
        }
        if self.n_representers > self.n_candidates {
            return Err(AcquisitionError::TooFewCandidates {
                wanted: self.n_representers,
                available: self.n_candidates,
            });
        }
        Ok(())
    }
}

/// Discretization support for the minimizer distribution; every point is
/// implicitly on the target task.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresenterSet {
    points: Vec<ConfigPoint>,
}

impl RepresenterSet {
    pub fn new(points: Vec<ConfigPoint>) -> Result<Self, AcquisitionError> {
        if points.is_empty() {
            return Err(AcquisitionError::NoRepresenters);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ConfigPoint] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Probability that each representer is the minimizer at the target task.
#[derive(Debug, Clone, PartialEq)]
pub struct PminEstimate {
    probs: Vec<f64>,
}

impl PminEstimate {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self, AcquisitionError> {
        let total: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(AcquisitionError::InvalidProbabilities);
        }
        Ok(Self { probs })
    }

    /// Smoothed, normalized distribution from argmin frequencies in `[0, 1]`.
    fn from_frequencies(freq: &[f64], n_mc: usize) -> Self {
        let eps = 1.0 / (n_mc as f64 * freq.len() as f64);
        let total: f64 = freq.iter().map(|f| f + eps).sum();
        Self { probs: freq.iter().map(|f| (f + eps) / total).collect() }
    }
}

pub fn entropy(p: &PminEstimate) -> f64 {
    entropy_of(&p.probs)
}

fn entropy_of(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

/// Expected improvement at the target task below the best posterior mean
/// over observed configurations, averaged over ensemble members.
pub fn representer_weights(ensemble: &GpEnsemble, candidates: &[ConfigPoint]) -> Result<Vec<f64>, AcquisitionError> {
    let mut best = f64::INFINITY;
    for o in ensemble.data().iter() {
        best = best.min(ensemble.mean(&o.x, TaskValue::TARGET)?);
    }
    let normal = Normal::standard();
    let n = ensemble.len() as f64;
    candidates
        .iter()
        .map(|x| {
            let mut ei = 0.0;
            for m in ensemble.members() {
                let (mu, var) = m.posterior(x, TaskValue::TARGET)?;
                let sd = var.sqrt();
                let z = (best - mu) / sd;
                ei += (best - mu) * normal.cdf(z) + sd * normal.pdf(z);
            }
            Ok((ei / n).max(EI_FLOOR))
        })
        .collect()
}

/// Weighted sampling of `k` distinct indices, each draw proportional to
/// the remaining weights.
pub fn sample_weighted_indices(weights: &[f64], k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(w.len()) {
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &wi) in w.iter().enumerate() {
            if wi <= 0.0 {
                continue;
            }
            pick = Some(i);
            if u < wi {
                break;
            }
            u -= wi;
        }
        let i = pick.expect("positive weights remain");
        out.push(i);
        w[i] = 0.0;
    }
    out
}

pub fn select_representers(
    ensemble: &GpEnsemble,
    space: &SearchSpace,
    cfg: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<RepresenterSet, AcquisitionError> {
    if cfg.n_representers == 0 {
        return Err(AcquisitionError::ZeroCount("n_representers"));
    }
    if cfg.n_representers > cfg.n_candidates {
        return Err(AcquisitionError::TooFewCandidates {
            wanted: cfg.n_representers,
            available: cfg.n_candidates,
        });
    }
    let candidates: Vec<ConfigPoint> = (0..cfg.n_candidates).map(|_| space.sample_uniform(rng)).collect();
    let weights = representer_weights(ensemble, &candidates)?;
    let picked = sample_weighted_indices(&weights, cfg.n_representers, rng);
    RepresenterSet::new(picked.into_iter().map(|i| candidates[i].clone()).collect())
}

fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// In-place rank-one downdate: turns `L` into the factor of `L Lᵀ − x xᵀ`.
/// Returns `false` when the result would not be positive definite.
fn cholesky_downdate(l: &mut DMatrix<f64>, x: &mut DVector<f64>) -> bool {
    let n = l.nrows();
    for k in 0..n {
        let lkk = l[(k, k)];
        let r2 = lkk * lkk - x[k] * x[k];
        if !(r2 > 0.0) {
            return false;
        }
        let r = r2.sqrt();
        let c = r / lkk;
        let s = x[k] / lkk;
        l[(k, k)] = r;
        for i in k + 1..n {
            l[(i, k)] = (l[(i, k)] - s * x[i]) / c;
            x[i] = c * x[i] - s * l[(i, k)];
        }
    }
    true
}

/// Argmin frequency of each row across the columns of `samples + shift·u`.
fn argmin_frequencies(samples: &DMatrix<f64>, u: Option<(&DVector<f64>, f64)>) -> Vec<f64> {
    let (r, n) = samples.shape();
    let mut counts = vec![0usize; r];
    for j in 0..n {
        let col = samples.column(j);
        let mut best = 0;
        let mut best_v = f64::INFINITY;
        for i in 0..r {
            let v = match u {
                Some((u, e)) => col[i] + e * u[i],
                None => col[i],
            };
            if v < best_v {
                best_v = v;
                best = i;
            }
        }
        counts[best] += 1;
    }
    counts.into_iter().map(|c| c as f64 / n as f64).collect()
}

struct MemberState<'a> {
    gp: &'a GpModel,
    /// `L⁻¹ K(X, R)` with `L` the training-data factor.
    whitened_reps: DMatrix<f64>,
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    covariance: DMatrix<f64>,
    pmin: PminEstimate,
}

/// Precomputed entropy-search state: representer posteriors, their
/// factors and the shared Monte-Carlo draws for one acquisition round.
pub struct EntropySearch<'a> {
    members: Vec<MemberState<'a>>,
    reps: Vec<Vec<f64>>,
    normals: DMatrix<f64>,
    fantasies: Vec<f64>,
    n_mc: usize,
    pmin: PminEstimate,
}

impl<'a> EntropySearch<'a> {
    pub fn new(
        ensemble: &'a GpEnsemble,
        reps: &RepresenterSet,
        n_mc: usize,
        n_fantasy: usize,
        rng: &mut Rng,
    ) -> Result<Self, AcquisitionError> {
        if n_mc == 0 {
            return Err(AcquisitionError::ZeroCount("n_mc"));
        }
        if n_fantasy == 0 {
            return Err(AcquisitionError::ZeroCount("n_fantasy"));
        }
        let r = reps.count();
        let normals = standard_normal_matrix(r, n_mc, rng);
        let fantasies: Vec<f64> = (0..n_fantasy).map(|_| rng.sample(StandardNormal)).collect();
        let mut members = Vec::with_capacity(ensemble.len());
        let mut avg = vec![0.0; r];
        for gp in ensemble.members() {
            let m = member_state(gp, reps, &normals, n_mc)?;
            for (a, f) in avg.iter_mut().zip(&m.raw_freq) {
                *a += f / ensemble.len() as f64;
            }
            members.push(m.state);
        }
        Ok(Self {
            members,
            reps: reps.points().iter().map(|p| p.coords().to_vec()).collect(),
            normals,
            fantasies,
            n_mc,
            pmin: PminEstimate::from_frequencies(&avg, n_mc),
        })
    }

    /// Ensemble-averaged minimizer distribution before any new data.
    pub fn pmin(&self) -> &PminEstimate {
        &self.pmin
    }

    /// Expected entropy reduction for querying `(x, t)`, averaged over
    /// ensemble members and fantasized outcomes.
    pub fn reduction(&self, x: &[f64], t: f64) -> f64 {
        let mut total = 0.0;
        for m in &self.members {
            total += self.member_reduction(m, x, t);
        }
        total / self.members.len() as f64
    }

    fn member_reduction(&self, m: &MemberState<'_>, x: &[f64], t: f64) -> f64 {
        let gp = m.gp;
        let a_c = gp.whitened_cross_cov(x, t);
        let spec = gp.spec();
        let k_rc = DVector::from_iterator(
            m.mean.len(),
            self.reps.iter().map(|rep| spec.eval_unchecked(rep, 1.0, x, t)),
        );
        let v = k_rc - m.whitened_reps.tr_mul(&a_c);
        let var_c = (spec.prior_var(t) - a_c.norm_squared()).max(0.0);
        let s = var_c + gp.noise_var() + gp.jitter();
        if !(s > 0.0) || v.iter().all(|&e| e == 0.0) {
            return 0.0;
        }
        let u = v / s.sqrt();

        let mut chol = m.chol.clone();
        let mut work = u.clone();
        if !cholesky_downdate(&mut chol, &mut work) {
            let cov = &m.covariance - &u * u.transpose();
            match cholesky_with_jitter(&cov) {
                Some((l, _)) => chol = l,
                None => return 0.0,
            }
        }
        let samples = sample_paths(&m.mean, &chol, &self.normals);

        let h_before = entropy(&m.pmin);
        let mut h_after = 0.0;
        for &e in &self.fantasies {
            let freq = argmin_frequencies(&samples, Some((&u, e)));
            h_after += entropy(&PminEstimate::from_frequencies(&freq, self.n_mc));
        }
        h_before - h_after / self.fantasies.len() as f64
    }
}

struct BuiltMember<'a> {
    state: MemberState<'a>,
    raw_freq: Vec<f64>,
}

fn sample_paths(mean: &DVector<f64>, chol: &DMatrix<f64>, normals: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = chol * normals;
    for mut col in s.column_iter_mut() {
        col += mean;
    }
    s
}

fn member_state<'a>(
    gp: &'a GpModel,
    reps: &RepresenterSet,
    normals: &DMatrix<f64>,
    n_mc: usize,
) -> Result<BuiltMember<'a>, AcquisitionError> {
    let n = gp.len();
    let r = reps.count();
    let mut whitened = DMatrix::zeros(n, r);
    let mut mean = DVector::zeros(r);
    for (j, p) in reps.points().iter().enumerate() {
        if p.dim() != gp.spec().dim() {
            return Err(GpError::DimensionMismatch { expected: gp.spec().dim(), actual: p.dim() }.into());
        }
        let k = gp.cross_cov(p.coords(), 1.0);
        mean[j] = k.dot(gp.alpha());
        let w = gp.chol().solve_lower_triangular(&k).expect("non-singular factor");
        whitened.set_column(j, &w);
    }
    let spec = gp.spec();
    let mut cov = DMatrix::from_fn(r, r, |i, j| {
        spec.eval_unchecked(reps.points()[i].coords(), 1.0, reps.points()[j].coords(), 1.0)
    });
    cov -= whitened.tr_mul(&whitened);
    cov = (&cov + cov.transpose()) * 0.5;
    let (chol, _) = cholesky_with_jitter(&cov).ok_or(AcquisitionError::Factorization)?;
    let samples = sample_paths(&mean, &chol, normals);
    let raw_freq = argmin_frequencies(&samples, None);
    let pmin = PminEstimate::from_frequencies(&raw_freq, n_mc);
    Ok(BuiltMember {
        state: MemberState {
            gp,
            whitened_reps: whitened,
            mean,
            chol,
            covariance: cov,
            pmin,
        },
        raw_freq,
    })
}

/// Monte-Carlo estimate of the minimizer distribution over `reps`.
pub fn estimate_pmin(
    ensemble: &GpEnsemble,
    reps: &RepresenterSet,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<PminEstimate, AcquisitionError> {
    if n_mc == 0 {
        return Err(AcquisitionError::ZeroCount("n_mc"));
    }
    let normals = standard_normal_matrix(reps.count(), n_mc, rng);
    let mut avg = vec![0.0; reps.count()];
    for gp in ensemble.members() {
        let m = member_state(gp, reps, &normals, n_mc)?;
        for (a, f) in avg.iter_mut().zip(&m.raw_freq) {
            *a += f / ensemble.len() as f64;
        }
    }
    Ok(PminEstimate::from_frequencies(&avg, n_mc))
}

pub fn expected_entropy_reduction(
    ensemble: &GpEnsemble,
    candidate: (&ConfigPoint, TaskValue),
    reps: &RepresenterSet,
    cfg: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<f64, AcquisitionError> {
    let es = EntropySearch::new(ensemble, reps, cfg.n_mc, cfg.n_fantasy, rng)?;
    let d = ensemble.members()[0].spec().dim();
    if candidate.0.dim() != d {
        return Err(GpError::DimensionMismatch { expected: d, actual: candidate.0.dim() }.into());
    }
    Ok(es.reduction(candidate.0.coords(), candidate.1.value()))
}

/// Predicted cost `exp(E[ln c])`, averaging the log-cost posterior mean
/// over cost-ensemble members.
pub fn predicted_cost(cost: &GpEnsemble, x: &ConfigPoint, t: TaskValue) -> Result<f64, AcquisitionError> {
    Ok(cost.mean(x, t)?.exp())
}

/// Cost-normalized entropy reduction for one candidate.
pub fn acquisition_ibo(
    candidate: (&ConfigPoint, TaskValue),
    ensemble_f: &GpEnsemble,
    ensemble_c: &GpEnsemble,
    reps: &RepresenterSet,
    cfg: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<f64, AcquisitionError> {
    if ensemble_f.len() == 0 || ensemble_f.data().len() != ensemble_c.data().len() {
        return Err(AcquisitionError::MismatchedEnsembles);
    }
    let reduction = expected_entropy_reduction(ensemble_f, candidate, reps, cfg, rng)?;
    Ok(cost_normalize(reduction, predicted_cost(ensemble_c, candidate.0, candidate.1)?))
}

pub fn cost_normalize(reduction: f64, cost: f64) -> f64 {
    if reduction == 0.0 {
        0.0
    } else {
        reduction / cost
    }
}

/// Index of the first maximal value; NaN never wins.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Scores `cfg.n_candidates` random configurations on every task of the
/// grid and returns the best `(x, t)`. Without a cost ensemble the raw
/// entropy reduction is maximized.
pub fn maximize_acquisition(
    ensemble_f: &GpEnsemble,
    ensemble_c: Option<&GpEnsemble>,
    space: &SearchSpace,
    cfg: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<(ConfigPoint, TaskValue), AcquisitionError> {
    cfg.validate()?;
    if let Some(c) = ensemble_c {
        if c.data().len() != ensemble_f.data().len() {
            return Err(AcquisitionError::MismatchedEnsembles);
        }
    }
    let mut rep_rng = fork(rng);
    let mut es_rng = fork(rng);
    let mut cand_rng = fork(rng);
    let reps = select_representers(ensemble_f, space, cfg, &mut rep_rng)?;
    let es = EntropySearch::new(ensemble_f, &reps, cfg.n_mc, cfg.n_fantasy, &mut es_rng)?;
    let tasks = cfg
        .task_grid
        .iter()
        .map(|&t| TaskValue::new(t))
        .collect::<Result<Vec<_>, _>>()?;
    let candidates: Vec<ConfigPoint> = (0..cfg.n_candidates).map(|_| space.sample_uniform(&mut cand_rng)).collect();

    let mut scores = Vec::with_capacity(candidates.len() * tasks.len());
    for x in &candidates {
        for &t in &tasks {
            let red = es.reduction(x.coords(), t.value());
            let score = match ensemble_c {
                Some(c) => cost_normalize(red, predicted_cost(c, x, t)?),
                None => red,
            };
            scores.push(score);
        }
    }
    let best = argmax_first(&scores).unwrap_or(0);
    Ok((candidates[best / tasks.len()].clone(), tasks[best % tasks.len()]))
}
