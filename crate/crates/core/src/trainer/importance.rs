//! Importance-sampled and plain SGD steps over a presample.
//!
//! A presample of `B` points is scored with a forward pass. The batch of
//! `b` points is then drawn either uniformly or with probability
//! proportional to the scores, in which case each sampled gradient is
//! reweighted by `1 / (B·p_i)` so the update stays unbiased for the
//! presample mean gradient.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mlp::{l2_penalty, per_example_losses, weighted_forward_backward, Gradients, MlpModel};
use super::TrainError;
use crate::rng::Rng;

/// Sums below this are treated as all-zero scores.
const ZERO_MASS: f64 = 1e-12;

/// Per-example scores: the cross-entropy loss of each column of `x`.
pub fn score_examples(model: &MlpModel, x: &DMatrix<f64>, labels: &[usize]) -> Result<Vec<f64>, TrainError> {
    per_example_losses(model, x, labels).map(|v| v.into_iter().map(|l| l.max(0.0)).collect())
}

/// `p_i = s_i / Σ s`, uniform when the scores carry no mass.
pub fn importance_distribution(scores: &[f64]) -> Result<Vec<f64>, TrainError> {
    if scores.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, s)| !(**s >= 0.0) || !s.is_finite()) {
        return Err(TrainError::InvalidScore { index, value });
    }
    let total: f64 = scores.iter().sum();
    let n = scores.len() as f64;
    if total < ZERO_MASS {
        return Ok(vec![1.0 / n; scores.len()]);
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDecision {
    pub use_is: bool,
    /// `B · Σ p_i²`, equal to `mean(s²) / mean(s)²` on the presample.
    pub tau: f64,
    /// `(B + 3b) / (3b)`
    pub threshold: f64,
}

/// Decides whether an importance-sampled step pays for the scoring of the
/// whole presample. Scoring costs one forward pass per point, about a
/// third of a forward-backward pass, so with variance ratio `1 - 1/τ` the
/// break-even point is `τ = (B + 3b) / (3b)`.
pub fn do_sgd_test(scores: &[f64], batch_size: usize) -> Result<StepDecision, TrainError> {
    let presample = scores.len();
    if batch_size == 0 || presample < batch_size {
        return Err(TrainError::PresampleTooSmall { presample, batch: batch_size });
    }
    let p = importance_distribution(scores)?;
    let tau = presample as f64 * p.iter().map(|v| v * v).sum::<f64>();
    let threshold = (presample + 3 * batch_size) as f64 / (3 * batch_size) as f64;
    Ok(StepDecision { use_is: tau > threshold, tau, threshold })
}

/// Draws `b` indices with replacement from `probs`.
pub fn sample_importance_indices(probs: &[f64], b: usize, rng: &mut Rng) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cdf.push(acc);
    }
    (0..b)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
            // Skip zero-probability slots that share a cdf value.
            (i..probs.len()).find(|&j| probs[j] > 0.0).unwrap_or(i)
        })
        .collect()
}

fn gather(x: &DMatrix<f64>, labels: &[usize], idx: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
    let cols: Vec<_> = idx.iter().map(|&i| x.column(i)).collect();
    (DMatrix::from_columns(&cols), idx.iter().map(|&i| labels[i]).collect())
}

/// `(1/b) Σ_j ∇g_{i_j} / (B·p_{i_j})` for sampled presample indices, plus
/// the L2 term. Returns the weighted loss estimate too.
pub fn is_weighted_gradient(
    model: &MlpModel,
    presample: &DMatrix<f64>,
    labels: &[usize],
    probs: &[f64],
    indices: &[usize],
    l2_weight: f64,
) -> Result<(f64, Gradients), TrainError> {
    let big_b = presample.ncols() as f64;
    let b = indices.len() as f64;
    if probs.len() != presample.ncols() {
        return Err(TrainError::LabelCount { expected: presample.ncols(), actual: probs.len() });
    }
    let weights: Vec<f64> = indices.iter().map(|&i| 1.0 / (b * big_b * probs[i])).collect();
    let (xb, yb) = gather(presample, labels, indices);
    weighted_forward_backward(model, &xb, &yb, Some(&weights), l2_weight)
}

fn apply(model: &mut MlpModel, grads: &Gradients, lr: f64) -> Result<(), TrainError> {
    model.axpy(-lr, grads);
    if model.is_finite() {
        Ok(())
    } else {
        Err(TrainError::NonFinite)
    }
}

/// Importance-sampled step; returns the plain mean loss of the sampled batch.
pub fn is_sgd_step(
    model: &mut MlpModel,
    presample: &DMatrix<f64>,
    labels: &[usize],
    probs: &[f64],
    batch_size: usize,
    lr: f64,
    l2_weight: f64,
    rng: &mut Rng,
) -> Result<f64, TrainError> {
    if batch_size == 0 || presample.ncols() < batch_size {
        return Err(TrainError::PresampleTooSmall { presample: presample.ncols(), batch: batch_size });
    }
    let idx = sample_importance_indices(probs, batch_size, rng);
    let (_, grads) = is_weighted_gradient(model, presample, labels, probs, &idx, l2_weight)?;
    let (xb, yb) = gather(presample, labels, &idx);
    let batch_loss = per_example_losses(model, &xb, &yb)?.iter().sum::<f64>() / batch_size as f64;
    apply(model, &grads, lr)?;
    Ok(batch_loss)
}

/// Plain minibatch step on the mean gradient; returns the batch loss
/// without the L2 term.
pub fn vanilla_sgd_step(
    model: &mut MlpModel,
    batch: &DMatrix<f64>,
    labels: &[usize],
    lr: f64,
    l2_weight: f64,
) -> Result<f64, TrainError> {
    let (loss, grads) = weighted_forward_backward(model, batch, labels, None, l2_weight)?;
    let data_loss = loss - l2_penalty(model, l2_weight);
    apply(model, &grads, lr)?;
    Ok(data_loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn distribution_examples() {
        assert_eq!(importance_distribution(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
        assert_eq!(importance_distribution(&[0.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.25; 4]);
        assert_eq!(importance_distribution(&[2.5]).unwrap(), vec![1.0]);
        assert!(matches!(
            importance_distribution(&[1.0, -0.5]),
            Err(TrainError::InvalidScore { index: 1, .. })
        ));
    }

    #[test]
    fn dosgd_examples() {
        let d = do_sgd_test(&[1.0; 4], 1).unwrap();
        assert_eq!(d.tau, 1.0);
        assert!((d.threshold - 7.0 / 3.0).abs() < 1e-15);
        assert!(!d.use_is);

        let d = do_sgd_test(&[1.0, 0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(d.tau, 4.0);
        assert!(d.use_is);

        let d = do_sgd_test(&[3.0, 1.0], 1).unwrap();
        assert!((d.tau - 1.25).abs() < 1e-15);
        assert!((d.threshold - 5.0 / 3.0).abs() < 1e-15);
        assert!(!d.use_is);

        assert!(do_sgd_test(&[1.0], 2).is_err());
    }

    #[test]
    fn importance_weights_for_two_point_presample() {
        let model = MlpModel::new(&[2, 3], &mut seeded(2)).unwrap();
        let x = DMatrix::from_column_slice(2, 2, &[0.5, -0.1, -0.7, 0.9]);
        let labels = [0, 2];
        let probs = importance_distribution(&[3.0, 1.0]).unwrap();
        for (i, w) in [(0usize, 2.0 / 3.0), (1, 2.0)] {
            let (_, g) = is_weighted_gradient(&model, &x, &labels, &probs, &[i], 0.0).unwrap();
            let (xi, yi) = gather(&x, &labels, &[i]);
            let (_, plain) = weighted_forward_backward(&model, &xi, &yi, None, 0.0).unwrap();
            let mut diff = g.clone();
            diff.axpy(-w, &plain);
            assert!(diff.norm_squared().sqrt() < 1e-12 * plain.norm_squared().sqrt().max(1.0));
        }
    }

    #[test]
    fn uniform_probabilities_reduce_to_vanilla_step() {
        let model0 = MlpModel::new(&[2, 4, 3], &mut seeded(3)).unwrap();
        let x = DMatrix::from_column_slice(2, 4, &[0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]);
        let labels = [0, 1, 2, 1];
        let probs = vec![0.25; 4];
        let mut a = model0.clone();
        let mut rng = seeded(11);
        is_sgd_step(&mut a, &x, &labels, &probs, 2, 0.1, 1e-3, &mut rng).unwrap();
        let idx = sample_importance_indices(&probs, 2, &mut seeded(11));
        let (xb, yb) = gather(&x, &labels, &idx);
        let mut b = model0.clone();
        vanilla_sgd_step(&mut b, &xb, &yb, 0.1, 1e-3).unwrap();
        let mut d = a.clone();
        d.axpy(-1.0, &b);
        assert!(d.norm_squared().sqrt() < 1e-14);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let model0 = MlpModel::new(&[2, 3], &mut seeded(4)).unwrap();
        let mut m = model0.clone();
        let x = DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        vanilla_sgd_step(&mut m, &x, &[0, 1], 0.0, 0.1).unwrap();
        assert_eq!(m.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   model0.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn sampler_never_picks_zero_probability() {
        let mut rng = seeded(8);
        let probs = [0.0, 0.5, 0.0, 0.5];
        for i in sample_importance_indices(&probs, 1000, &mut rng) {
            assert!(probs[i] > 0.0);
        }
    }
}
