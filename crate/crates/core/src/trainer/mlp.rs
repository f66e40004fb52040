//! A small fully connected ReLU network with a softmax output.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::TrainError;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// Parameter-shaped container for gradients.
pub type Gradients = MlpModel;

impl MlpModel {
    /// He-uniform weights, zero biases. `widths` lists input width, hidden
    /// widths and class count.
    pub fn new(widths: &[usize], rng: &mut Rng) -> Result<Self, TrainError> {
        Self::check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-bound..bound)),
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self, TrainError> {
        Self::check_widths(widths)?;
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| Layer { weights: DMatrix::zeros(w[1], w[0]), bias: DVector::zeros(w[1]) })
                .collect(),
        })
    }

    fn check_widths(widths: &[usize]) -> Result<(), TrainError> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(TrainError::InvalidArchitecture(widths.to_vec()));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width()).chain(self.layers.iter().map(|l| l.weights.nrows())).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Multiply-adds of one forward pass for a single example.
    pub fn forward_work(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.len() as f64).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend(l.weights.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = it.next().expect("flat vector too short");
            }
            for b in l.bias.iter_mut() {
                *b = it.next().expect("flat vector too short");
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// `self += a · other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            l.weights += &o.weights * a;
            l.bias.axpy(a, &o.bias, 1.0);
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.norm_squared() + l.bias.norm_squared()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &DMatrix<f64>, labels: &[usize]) -> Result<(), TrainError> {
        if x.ncols() == 0 {
            return Err(TrainError::EmptyBatch);
        }
        if x.nrows() != self.input_width() {
            return Err(TrainError::FeatureMismatch { expected: self.input_width(), actual: x.nrows() });
        }
        if labels.len() != x.ncols() {
            return Err(TrainError::LabelCount { expected: x.ncols(), actual: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.n_classes()) {
            return Err(TrainError::LabelOutOfRange { label: bad, n_classes: self.n_classes() });
        }
        Ok(())
    }

    /// Pre-activations of every layer; the last entry holds the logits.
    fn forward(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.weights * &a;
            for mut col in z.column_iter_mut() {
                col += &l.bias;
            }
            if i + 1 < self.layers.len() {
                a = z.map(|v| v.max(0.0));
            }
            pre.push(z);
        }
        pre
    }

    pub fn logits(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward(x).pop().expect("at least one layer")
    }

    /// Predicted class per column of `x`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let z = self.logits(x);
        z.column_iter().map(|c| c.argmax().0).collect()
    }
}

/// Cross-entropy of each column's logits against its label.
fn per_example_ce(logits: &DMatrix<f64>, labels: &[usize]) -> Vec<f64> {
    logits
        .column_iter()
        .zip(labels)
        .map(|(c, &y)| {
            let m = c.max();
            let lse = m + c.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - c[y]
        })
        .collect()
}

/// Per-example cross-entropy losses from a forward pass.
pub fn per_example_losses(model: &MlpModel, x: &DMatrix<f64>, labels: &[usize]) -> Result<Vec<f64>, TrainError> {
    model.check_input(x, labels)?;
    let losses = per_example_ce(&model.logits(x), labels);
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(TrainError::NonFinite);
    }
    Ok(losses)
}

pub fn l2_penalty(model: &MlpModel, l2_weight: f64) -> f64 {
    0.5 * l2_weight * model.layers.iter().map(|l| l.weights.norm_squared()).sum::<f64>()
}

/// Loss `Σ_j w_j ℓ_j + ½ λ Σ‖W‖²` and its gradient. With `weights = None`
/// every example gets weight `1/n`, giving the mean cross-entropy.
pub fn weighted_forward_backward(
    model: &MlpModel,
    x: &DMatrix<f64>,
    labels: &[usize],
    weights: Option<&[f64]>,
    l2_weight: f64,
) -> Result<(f64, Gradients), TrainError> {
    model.check_input(x, labels)?;
    let n = x.ncols();
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(TrainError::LabelCount { expected: n, actual: w.len() });
            }
            w.to_vec()
        }
        None => vec![1.0 / n as f64; n],
    };
    let pre = model.forward(x);
    let logits = pre.last().expect("at least one layer");
    let losses = per_example_ce(logits, labels);
    let loss = losses.iter().zip(&w).map(|(l, wi)| l * wi).sum::<f64>() + l2_penalty(model, l2_weight);
    if !loss.is_finite() {
        return Err(TrainError::NonFinite);
    }

    // Softmax minus one-hot, scaled per example.
    let mut delta = logits.clone();
    for (j, mut col) in delta.column_iter_mut().enumerate() {
        let m = col.max();
        col.apply(|v| *v = (*v - m).exp());
        let s = col.sum();
        col /= s;
        col[labels[j]] -= 1.0;
        col *= w[j];
    }

    let mut grads = model.zeros_like();
    for i in (0..model.layers.len()).rev() {
        let input = if i == 0 { x.clone() } else { pre[i - 1].map(|v| v.max(0.0)) };
        grads.layers[i].weights = &delta * input.transpose();
        grads.layers[i].weights += &model.layers[i].weights * l2_weight;
        grads.layers[i].bias = delta.column_sum();
        if i > 0 {
            let mut back = model.layers[i].weights.tr_mul(&delta);
            back.zip_apply(&pre[i - 1], |b, z| {
                if z <= 0.0 {
                    *b = 0.0
                }
            });
            delta = back;
        }
    }
    if !grads.is_finite() {
        return Err(TrainError::NonFinite);
    }
    Ok((loss, grads))
}

/// Mean cross-entropy plus L2 penalty, and its gradient.
pub fn mlp_forward_backward(
    model: &MlpModel,
    x: &DMatrix<f64>,
    labels: &[usize],
    l2_weight: f64,
) -> Result<(f64, Gradients), TrainError> {
    weighted_forward_backward(model, x, labels, None, l2_weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_model_has_uniform_loss() {
        let m = MlpModel::zeros(&[3, 4]).unwrap();
        let x = DMatrix::from_column_slice(3, 2, &[1.0, -2.0, 0.5, 0.3, 0.3, 0.3]);
        let (loss, _) = mlp_forward_backward(&m, &x, &[1, 3], 0.0).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn duplicated_rows_match_single_row() {
        let m = MlpModel::new(&[2, 5, 3], &mut seeded(1)).unwrap();
        let one = DMatrix::from_column_slice(2, 1, &[0.4, -1.2]);
        let dup = DMatrix::from_column_slice(2, 3, &[0.4, -1.2, 0.4, -1.2, 0.4, -1.2]);
        let (a, _) = mlp_forward_backward(&m, &one, &[2], 0.0).unwrap();
        let (b, _) = mlp_forward_backward(&m, &dup, &[2, 2, 2], 0.0).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn input_validation() {
        let m = MlpModel::zeros(&[2, 3]).unwrap();
        let x = DMatrix::zeros(3, 1);
        assert!(matches!(mlp_forward_backward(&m, &x, &[0], 0.0), Err(TrainError::FeatureMismatch { .. })));
        let x = DMatrix::zeros(2, 0);
        assert!(matches!(mlp_forward_backward(&m, &x, &[], 0.0), Err(TrainError::EmptyBatch)));
        let x = DMatrix::zeros(2, 1);
        assert!(matches!(mlp_forward_backward(&m, &x, &[5], 0.0), Err(TrainError::LabelOutOfRange { .. })));
        assert!(MlpModel::zeros(&[2]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = MlpModel::new(&[3, 4, 3], &mut seeded(9)).unwrap();
        let x = DMatrix::from_column_slice(3, 3, &[0.2, -0.5, 1.1, 0.7, 0.3, -0.9, -1.3, 0.4, 0.05]);
        let labels = [0, 2, 1];
        let weights = [0.5, 0.2, 0.3];
        let l2 = 0.01;
        let (_, g) = weighted_forward_backward(&m, &x, &labels, Some(&weights), l2).unwrap();
        let flat = m.to_flat();
        let gflat = g.to_flat();
        let h = 1e-6;
        let mut probe = m.clone();
        for k in 0..flat.len() {
            let mut p = flat.clone();
            p[k] += h;
            probe.set_flat(&p);
            let up = weighted_forward_backward(&probe, &x, &labels, Some(&weights), l2).unwrap().0;
            p[k] -= 2.0 * h;
            probe.set_flat(&p);
            let down = weighted_forward_backward(&probe, &x, &labels, Some(&weights), l2).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - gflat[k]).abs() < 1e-6, "param {k}: fd {fd} vs {}", gflat[k]);
        }
    }

    #[test]
    fn flat_round_trip() {
        let m = MlpModel::new(&[3, 4, 2], &mut seeded(5)).unwrap();
        let mut z = m.zeros_like();
        z.set_flat(&m.to_flat());
        assert_eq!(z, m);
        assert_eq!(m.n_params(), 3 * 4 + 4 + 4 * 2 + 2);
    }
}
