//! Black-box problems: synthetic multi-fidelity functions with modeled
//! cost and an MLP-tuning problem backed by a dataset.

mod mlp_tuning;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mlp_tuning::{dataset_blackbox_eval, MlpSettings, MlpTuningProblem, MODELED_SECONDS_PER_WORK_UNIT};
pub use synthetic::{branin, hartmann3, synthetic_eval, SyntheticFunction, SyntheticParams, SyntheticProblem};

use crate::dataset::DatasetError;
use crate::rng::Rng;
use crate::space::{ConfigPoint, SearchSpace, SpaceError, TaskValue};
use crate::trainer::{TrainError, TrainReport};

pub const PROBLEM_NAMES: [&str; 4] = ["synthetic-2class", "digits-small", "branin-mf", "hartmann3-mf"];

/// Smallest dataset fraction on the log-fraction task axis.
pub const MIN_DATA_FRACTION: f64 = 1.0 / 128.0;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem `{name}`; known problems: {}", PROBLEM_NAMES.join(", "))]
    Unknown { name: String },
    #[error("invalid fidelity: {0}")]
    BadFidelity(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// How one evaluation is carried out. Synthetic problems read only `t`;
/// dataset problems read the presample factor and data fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub t: TaskValue,
    /// `s_B ∈ [2, 6]`; `None` trains with plain minibatch SGD.
    pub presample_factor: Option<f64>,
    /// Fraction of the training split used, in `[1/128, 1]`.
    pub data_fraction: f64,
}

impl Fidelity {
    /// Full data and plain SGD.
    pub fn target() -> Self {
        Self { t: TaskValue::TARGET, presample_factor: None, data_fraction: 1.0 }
    }

    /// Presample task: `s_B = 2 + 4t` on the full training split.
    pub fn presample(t: TaskValue) -> Self {
        Self { t, presample_factor: Some(presample_factor(t)), data_fraction: 1.0 }
    }

    /// Dataset-fraction task `s = 2^{7(t-1)}`, optionally with an IS trainer.
    pub fn fraction(t: TaskValue, presample: Option<TaskValue>) -> Self {
        Self { t, presample_factor: presample.map(presample_factor), data_fraction: data_fraction(t) }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if let Some(s) = self.presample_factor {
            if !(2.0..=6.0).contains(&s) {
                return Err(ProblemError::BadFidelity(format!("presample factor {s} outside [2, 6]")));
            }
        }
        if !(MIN_DATA_FRACTION..=1.0).contains(&self.data_fraction) {
            return Err(ProblemError::BadFidelity(format!("data fraction {} outside [1/128, 1]", self.data_fraction)));
        }
        Ok(())
    }
}

pub fn presample_factor(t: TaskValue) -> f64 {
    2.0 + 4.0 * t.value()
}

pub fn data_fraction(t: TaskValue) -> f64 {
    (7.0 * (t.value() - 1.0)).exp2()
}

/// Inverse of [`data_fraction`], clamped to `[0, 1]`.
pub fn fraction_task(s: f64) -> TaskValue {
    TaskValue::new((1.0 + s.log2() / 7.0).clamp(0.0, 1.0)).expect("clamped")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub report: TrainReport,
    /// Set when training aborted and `y` was replaced by the worst error.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub y: f64,
    /// Modeled seconds, strictly positive.
    pub cost: f64,
    /// Measured wall seconds of the evaluation.
    pub wall_seconds: f64,
    pub diagnostics: Option<Diagnostics>,
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &str;
    fn space(&self) -> &SearchSpace;
    fn evaluate(&self, x: &ConfigPoint, fidelity: &Fidelity, rng: &mut Rng) -> Result<EvalResult, ProblemError>;
    /// Noise-free objective at the target task, used for regret and reports.
    fn true_value(&self, x: &ConfigPoint) -> Result<f64, ProblemError>;
    /// Known global minimum of [`Problem::true_value`], if any.
    fn optimum(&self) -> Option<f64> {
        None
    }
}

pub fn problem_by_name(name: &str) -> Result<Box<dyn Problem>, ProblemError> {
    Ok(match name {
        "branin-mf" => Box::new(SyntheticProblem::new(SyntheticFunction::Branin, SyntheticParams::default())),
        "hartmann3-mf" => Box::new(SyntheticProblem::new(SyntheticFunction::Hartmann3, SyntheticParams::default())),
        "synthetic-2class" | "digits-small" => Box::new(MlpTuningProblem::builtin(name, MlpSettings::default())?),
        _ => return Err(ProblemError::Unknown { name: name.to_string() }),
    })
}
