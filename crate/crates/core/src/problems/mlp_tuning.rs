use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, EvalResult, Fidelity, Problem, ProblemError};
use crate::dataset::{load_dataset, Dataset, DatasetSource};
use crate::rng::Rng;
use crate::space::{ConfigPoint, Dimension, Scale, SearchSpace};
use crate::trainer::{train, TrainerConfig};

/// Converts modeled multiply-adds into the seconds reported as cost.
pub const MODELED_SECONDS_PER_WORK_UNIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSettings {
    pub epochs: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Seed of the reference run behind [`Problem::true_value`].
    pub reference_seed: u64,
}

impl Default for MlpSettings {
    fn default() -> Self {
        Self { epochs: 4, train_fraction: 0.8, split_seed: 0, reference_seed: 0 }
    }
}

/// Tunes learning rate, batch size, hidden width and L2 weight of a
/// one-hidden-layer MLP.
#[derive(Debug)]
pub struct MlpTuningProblem {
    name: String,
    space: SearchSpace,
    train: Dataset,
    val: Dataset,
    settings: MlpSettings,
    reference: Mutex<HashMap<Vec<u64>, f64>>,
}

impl MlpTuningProblem {
    pub fn new(name: &str, data: &Dataset, settings: MlpSettings) -> Self {
        let (train, val) = data.split(settings.train_fraction, settings.split_seed);
        let space = SearchSpace::new(vec![
            Dimension::continuous("learning_rate", 1e-3, 1.0, Scale::Log),
            Dimension::integer("batch_size", 8.0, 128.0, Scale::Log),
            Dimension::integer("hidden_width", 8.0, 64.0, Scale::Log),
            Dimension::continuous("l2_weight", 1e-6, 1e-2, Scale::Log),
        ])
        .expect("static bounds");
        Self { name: name.to_string(), space, train, val, settings, reference: Mutex::new(HashMap::new()) }
    }

    pub fn builtin(name: &str, settings: MlpSettings) -> Result<Self, ProblemError> {
        Ok(Self::new(name, &load_dataset(&DatasetSource::Builtin(name.to_string()))?, settings))
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    pub fn validation_set(&self) -> &Dataset {
        &self.val
    }

    pub fn decode(&self, x: &ConfigPoint, presample_factor: Option<f64>, seed: u64) -> Result<TrainerConfig, ProblemError> {
        let raw = self.space.to_raw(x)?;
        Ok(TrainerConfig {
            learning_rate: raw[0],
            batch_size: raw[1] as usize,
            hidden: vec![raw[2] as usize],
            l2_weight: raw[3],
            presample_factor,
            epochs: self.settings.epochs,
            seed,
        })
    }
}

/// Trains on the split (or a uniform subset of it) and reports validation
/// error. Aborted training yields `y = 1.0` with the failure recorded.
pub fn dataset_blackbox_eval(
    problem: &MlpTuningProblem,
    x: &ConfigPoint,
    fidelity: &Fidelity,
    rng: &mut Rng,
) -> Result<EvalResult, ProblemError> {
    problem.space.check(x)?;
    fidelity.validate()?;
    let start = Instant::now();
    let cfg = problem.decode(x, fidelity.presample_factor, rng.random())?;
    let m = problem.train.n_rows();
    let subset;
    let train_set = if fidelity.data_fraction < 1.0 {
        let n = ((fidelity.data_fraction * m as f64).round() as usize).max(cfg.batch_size.min(m)).max(1);
        let mut idx = index::sample(rng, m, n).into_vec();
        idx.sort_unstable();
        subset = problem.train.subset(&idx);
        &subset
    } else {
        &problem.train
    };
    let (y, report, aborted) = match train(&cfg, train_set, &problem.val) {
        Ok(r) => (r.validation_error, r, None),
        Err(f) => (1.0, f.partial, Some(f.error.to_string())),
    };
    let cost = (report.work_units * MODELED_SECONDS_PER_WORK_UNIT).max(f64::MIN_POSITIVE);
    Ok(EvalResult {
        y,
        cost,
        wall_seconds: start.elapsed().as_secs_f64(),
        diagnostics: Some(Diagnostics { report, aborted }),
    })
}

impl Problem for MlpTuningProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &ConfigPoint, fidelity: &Fidelity, rng: &mut Rng) -> Result<EvalResult, ProblemError> {
        dataset_blackbox_eval(self, x, fidelity, rng)
    }

    /// Validation error of a plain-SGD run on the full split with a fixed seed.
    fn true_value(&self, x: &ConfigPoint) -> Result<f64, ProblemError> {
        self.space.check(x)?;
        let key: Vec<u64> = x.coords().iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = self.reference.lock().expect("cache lock").get(&key) {
            return Ok(v);
        }
        let cfg = self.decode(x, None, self.settings.reference_seed)?;
        let v = train(&cfg, &self.train, &self.val).map_or(1.0, |r| r.validation_error);
        self.reference.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }
}
