use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::importance::{do_sgd_test, importance_distribution, is_sgd_step, score_examples, vanilla_sgd_step};
use super::mlp::MlpModel;
use super::TrainError;
use crate::dataset::Dataset;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub batch_size: usize,
    /// Presample size as a multiple of the batch size. `None` trains with
    /// plain minibatch SGD and never scores a presample.
    pub presample_factor: Option<f64>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2_weight must be non-negative");
        }
        if let Some(s) = self.presample_factor {
            if !(2.0..=6.0).contains(&s) {
                return bad("presample_factor must lie in [2, 6]");
            }
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    /// `B = round(b · s_B)`, capped by the available training points.
    pub fn presample_size(&self, available: usize) -> Option<usize> {
        let b = self.batch_size.min(available);
        self.presample_factor
            .map(|s| ((self.batch_size as f64 * s).round() as usize).clamp(b, available.max(b)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub validation_error: f64,
    /// Measured wall-clock seconds.
    pub cost_seconds: f64,
    /// Modeled compute: multiply-adds of every forward, backward and
    /// scoring pass, counting a backward pass as two forwards.
    pub work_units: f64,
    pub is_step_fraction: f64,
    pub is_steps: usize,
    pub steps: usize,
    /// Mean batch loss per epoch.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("training aborted after {} steps: {error}", partial.steps)]
pub struct TrainFailure {
    pub error: TrainError,
    pub partial: TrainReport,
}

fn gather(ds: &Dataset, idx: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
    let cols: Vec<_> = idx.iter().map(|&i| ds.features().column(i)).collect();
    (DMatrix::from_columns(&cols), idx.iter().map(|&i| ds.labels()[i]).collect())
}

/// Trains a fresh MLP and reports validation error and cost. Each step
/// presamples `B` uniform training points, scores them and runs either an
/// importance-sampled or a plain step depending on [`do_sgd_test`].
pub fn train(cfg: &TrainerConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainReport, TrainFailure> {
    let start = Instant::now();
    let mut report = TrainReport {
        validation_error: 1.0,
        cost_seconds: 0.0,
        work_units: 0.0,
        is_step_fraction: 0.0,
        is_steps: 0,
        steps: 0,
        loss_curve: Vec::with_capacity(cfg.epochs),
    };
    macro_rules! fail {
        ($e:expr) => {{
            report.cost_seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
            if report.steps > 0 {
                report.is_step_fraction = report.is_steps as f64 / report.steps as f64;
            }
            return Err(TrainFailure { error: $e, partial: report });
        }};
    }
    if let Err(e) = cfg.validate() {
        fail!(e);
    }
    if train_set.n_rows() == 0 {
        fail!(TrainError::EmptyBatch);
    }

    let mut widths = vec![train_set.n_features()];
    widths.extend(&cfg.hidden);
    widths.push(train_set.n_classes().max(val_set.n_classes()));
    let mut model = match MlpModel::new(&widths, &mut substream(cfg.seed, &[0])) {
        Ok(m) => m,
        Err(e) => fail!(e),
    };
    let mut rng = substream(cfg.seed, &[1]);
    let fwd = model.forward_work();

    let m = train_set.n_rows();
    let b = cfg.batch_size.min(m);
    let steps_per_epoch = m.div_ceil(b);
    let presample = cfg.presample_size(m);

    for _ in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..steps_per_epoch {
            let step = match presample {
                Some(big_b) => {
                    let idx = index::sample(&mut rng, m, big_b).into_vec();
                    let (xs, ys) = gather(train_set, &idx);
                    report.work_units += big_b as f64 * fwd;
                    let outcome = score_examples(&model, &xs, &ys).and_then(|scores| {
                        let decision = do_sgd_test(&scores, b)?;
                        if decision.use_is {
                            let probs = importance_distribution(&scores)?;
                            is_sgd_step(&mut model, &xs, &ys, &probs, b, cfg.learning_rate, cfg.l2_weight, &mut rng)
                                .map(|l| (l, true))
                        } else {
                            let (xb, yb) = (xs.columns(0, b).into_owned(), ys[..b].to_vec());
                            vanilla_sgd_step(&mut model, &xb, &yb, cfg.learning_rate, cfg.l2_weight).map(|l| (l, false))
                        }
                    });
                    outcome
                }
                None => {
                    let idx = index::sample(&mut rng, m, b).into_vec();
                    let (xb, yb) = gather(train_set, &idx);
                    vanilla_sgd_step(&mut model, &xb, &yb, cfg.learning_rate, cfg.l2_weight).map(|l| (l, false))
                }
            };
            report.work_units += 3.0 * b as f64 * fwd;
            match step {
                Ok((loss, used_is)) => {
                    report.steps += 1;
                    report.is_steps += used_is as usize;
                    epoch_loss += loss;
                }
                Err(e) => fail!(e),
            }
        }
        let mean = epoch_loss / steps_per_epoch as f64;
        if !mean.is_finite() {
            fail!(TrainError::NonFinite);
        }
        report.loss_curve.push(mean);
    }

    if val_set.n_rows() > 0 {
        let pred = model.predict(val_set.features());
        let wrong = pred.iter().zip(val_set.labels()).filter(|(p, y)| p != y).count();
        report.validation_error = wrong as f64 / val_set.n_rows() as f64;
        report.work_units += val_set.n_rows() as f64 * fwd;
    }
    report.is_step_fraction = report.is_steps as f64 / report.steps.max(1) as f64;
    report.cost_seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(report)
}
