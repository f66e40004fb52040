//! The outer optimization loop: initial design, GP refits, proposals,
//! evaluations, incumbents and trace records for every strategy.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{maximize_acquisition, AcquisitionConfig, AcquisitionError};
use crate::gp::{GpEnsemble, GpError, Observation};
use crate::kernels::KernelKind;
use crate::mcmc::{fit_ensemble, HyperPriors, McmcConfig, McmcError};
use crate::problems::{data_fraction, presample_factor, Fidelity, Problem, ProblemError};
use crate::rng::{fork, substream, Rng};
use crate::space::{ConfigPoint, SearchSpace, SpaceError, TaskValue};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Ibo,
    Es,
    EsIs,
    Fabolas,
    FabolasIs,
    Random,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [Self::Ibo, Self::Es, Self::EsIs, Self::Fabolas, Self::FabolasIs, Self::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ibo => "ibo",
            Self::Es => "es",
            Self::EsIs => "es_is",
            Self::Fabolas => "fabolas",
            Self::FabolasIs => "fabolas_is",
            Self::Random => "random",
        }
    }

    /// Strategies that fit a cost GP and divide by predicted cost.
    pub fn cost_aware(self) -> bool {
        matches!(self, Self::Ibo | Self::Fabolas | Self::FabolasIs)
    }

    fn is_fabolas(self) -> bool {
        matches!(self, Self::Fabolas | Self::FabolasIs)
    }

    /// Task values the acquisition searches over.
    pub fn task_grid(self) -> Vec<f64> {
        match self {
            Self::Ibo => vec![0.0, 0.25, 0.5, 0.75, 1.0],
            Self::Fabolas | Self::FabolasIs => (0..=7).map(|k| k as f64 / 7.0).collect(),
            Self::Es | Self::EsIs | Self::Random => vec![1.0],
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown strategy `{0}`; valid kinds: ibo, es, es_is, fabolas, fabolas_is, random")]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `n_init` Latin hypercube configurations at the target task.
    MaxTask,
    /// Each configuration at the four smallest dataset fractions.
    Ladder,
}

/// Normalized task ladder for the fraction axis: 1/128, 1/64, 1/32, 1/16.
pub const LADDER_TASKS: [f64; 4] = [0.0, 1.0 / 7.0, 2.0 / 7.0, 3.0 / 7.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub n_init: usize,
    pub n_bo: usize,
    pub seed: u64,
    pub init_scheme: InitScheme,
    pub acquisition: AcquisitionConfig,
    pub mcmc: McmcConfig,
    pub priors: HyperPriors,
    /// Normalized presample tasks that es_is and fabolas_is draw from.
    pub presample_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_init: 5,
            n_bo: 20,
            seed: 0,
            init_scheme: InitScheme::MaxTask,
            acquisition: AcquisitionConfig::default(),
            mcmc: McmcConfig::default(),
            priors: HyperPriors::default(),
            presample_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl RunConfig {
    pub fn validate(&self, strategy: StrategyKind) -> Result<(), EngineError> {
        if self.n_init < 2 {
            return Err(EngineError::InvalidConfig("n_init must be at least 2".into()));
        }
        if self.init_scheme == InitScheme::Ladder && !strategy.is_fabolas() {
            return Err(EngineError::InvalidConfig(format!(
                "ladder initialization needs a dataset-fraction strategy, not {strategy}"
            )));
        }
        if self.presample_grid.is_empty() || self.presample_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(EngineError::InvalidConfig("presample_grid needs values in [0, 1]".into()));
        }
        self.acquisition.validate()?;
        self.priors.validate()?;
        if self.mcmc.n_samples == 0 {
            return Err(McmcError::NoSamples.into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("trace output failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Bo,
}

/// One evaluation of a run. `x` and `incumbent_x` are in raw units; `t`
/// is the normalized task the surrogate saw and `task` the evaluated task
/// in its own units (presample factor, data fraction, or the synthetic
/// fidelity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub schema_version: u32,
    pub problem: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub iter: usize,
    pub phase: Phase,
    pub x: Vec<f64>,
    pub t: f64,
    pub task: f64,
    pub presample_factor: Option<f64>,
    pub data_fraction: f64,
    pub y: f64,
    pub cost: f64,
    pub cum_cost: f64,
    pub wall_seconds: f64,
    pub incumbent_x: Vec<f64>,
    pub incumbent_pred: f64,
    pub incumbent_true: f64,
}

#[derive(Debug, Error)]
#[error("run aborted after {} records: {error}", partial.len())]
pub struct RunFailure {
    pub error: EngineError,
    pub partial: Vec<TraceRecord>,
}

/// `n` points with exactly one point per stratum `[k/n, (k+1)/n)` in
/// every dimension.
pub fn latin_hypercube(space: &SearchSpace, n: usize, rng: &mut Rng) -> Vec<ConfigPoint> {
    let d = space.dim();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        cols.push(strata.into_iter().map(|k| (k as f64 + rng.random::<f64>()) / n as f64).collect());
    }
    (0..n)
        .map(|i| ConfigPoint::new(cols.iter().map(|c| c[i].min(1.0)).collect()).expect("unit cube"))
        .collect()
}

/// A planned evaluation: what the surrogate records and what the problem runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub x: ConfigPoint,
    pub model_t: TaskValue,
    pub fidelity: Fidelity,
}

impl Query {
    fn task_label(&self, strategy: StrategyKind) -> f64 {
        match strategy {
            StrategyKind::Ibo | StrategyKind::EsIs => self.fidelity.presample_factor.unwrap_or(self.fidelity.t.value()),
            StrategyKind::Fabolas | StrategyKind::FabolasIs => self.fidelity.data_fraction,
            StrategyKind::Es | StrategyKind::Random => self.fidelity.t.value(),
        }
    }
}

fn draw_task(grid: &[f64], rng: &mut Rng) -> TaskValue {
    TaskValue::new(*grid.choose(rng).expect("validated grid")).expect("validated grid")
}

/// Maps a strategy's chosen `(x, t)` to the evaluation it runs.
pub fn plan_query(strategy: StrategyKind, x: ConfigPoint, t: TaskValue, presample_grid: &[f64], rng: &mut Rng) -> Query {
    match strategy {
        StrategyKind::Ibo => Query { x, model_t: t, fidelity: Fidelity::presample(t) },
        StrategyKind::Es | StrategyKind::Random => Query { x, model_t: TaskValue::TARGET, fidelity: Fidelity::target() },
        StrategyKind::EsIs => {
            let tb = draw_task(presample_grid, rng);
            Query { x, model_t: TaskValue::TARGET, fidelity: Fidelity::presample(tb) }
        }
        StrategyKind::Fabolas => Query { x, model_t: t, fidelity: Fidelity::fraction(t, None) },
        StrategyKind::FabolasIs => {
            let tb = draw_task(presample_grid, rng);
            Query { x, model_t: t, fidelity: Fidelity::fraction(t, Some(tb)) }
        }
    }
}

/// Initial design, one query per planned evaluation.
pub fn initial_queries(
    strategy: StrategyKind,
    space: &SearchSpace,
    cfg: &RunConfig,
    rng: &mut Rng,
) -> Result<Vec<Query>, EngineError> {
    cfg.validate(strategy)?;
    let mut design_rng = fork(rng);
    let mut task_rng = fork(rng);
    let design = latin_hypercube(space, cfg.n_init, &mut design_rng);
    let tasks: &[f64] = match cfg.init_scheme {
        InitScheme::MaxTask => &[1.0],
        InitScheme::Ladder => &LADDER_TASKS,
    };
    let mut out = Vec::with_capacity(design.len() * tasks.len());
    for x in design {
        for &t in tasks {
            let t = TaskValue::new(t)?;
            out.push(plan_query(strategy, x.clone(), t, &cfg.presample_grid, &mut task_rng));
        }
    }
    Ok(out)
}

/// Evaluates the initial design.
pub fn initialize(
    strategy: StrategyKind,
    problem: &dyn Problem,
    cfg: &RunConfig,
    rng: &mut Rng,
) -> Result<Vec<Observation>, EngineError> {
    let queries = initial_queries(strategy, problem.space(), cfg, rng)?;
    let mut eval_rng = fork(rng);
    queries
        .into_iter()
        .map(|q| {
            let r = problem.evaluate(&q.x, &q.fidelity, &mut eval_rng)?;
            Ok(Observation::new(q.x, q.model_t, r.y, r.cost)?)
        })
        .collect()
}

/// Observed configuration with the lowest ensemble-mean prediction at the
/// target task; ties keep the earliest observation.
pub fn incumbent(ensemble: &GpEnsemble, history: &[Observation]) -> Result<(usize, ConfigPoint, f64), EngineError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, obs) in history.iter().enumerate() {
        let m = ensemble.mean(&obs.x, TaskValue::TARGET)?;
        if best.is_none_or(|(_, b)| m < b) {
            best = Some((i, m));
        }
    }
    let (i, m) = best.ok_or_else(|| EngineError::InvalidConfig("incumbent needs observations".into()))?;
    Ok((i, history[i].x.clone(), m))
}

/// Fitted surrogates over the current history.
pub struct SurrogateState<'a> {
    pub objective: &'a GpEnsemble,
    pub cost: Option<&'a GpEnsemble>,
}

/// Chooses the next `(x, t)` from the fitted surrogates.
pub fn propose(
    strategy: StrategyKind,
    space: &SearchSpace,
    state: &SurrogateState<'_>,
    cfg: &RunConfig,
    rng: &mut Rng,
) -> Result<Query, EngineError> {
    let mut acq_rng = fork(rng);
    let mut task_rng = fork(rng);
    let (x, t) = match strategy {
        StrategyKind::Random => (space.sample_uniform(&mut acq_rng), TaskValue::TARGET),
        _ => {
            let acq = AcquisitionConfig { task_grid: strategy.task_grid(), ..cfg.acquisition.clone() };
            let cost = if strategy.cost_aware() { state.cost } else { None };
            maximize_acquisition(state.objective, cost, space, &acq, &mut acq_rng)?
        }
    };
    Ok(plan_query(strategy, x, t, &cfg.presample_grid, &mut task_rng))
}

struct Streams {
    design: Rng,
    eval: Rng,
    mcmc: Rng,
    propose: Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            design: substream(seed, &[1]),
            eval: substream(seed, &[2]),
            mcmc: substream(seed, &[3]),
            propose: substream(seed, &[4]),
        }
    }
}

/// Runs the full loop and returns the trace.
pub fn run_bo(strategy: StrategyKind, problem: &dyn Problem, cfg: &RunConfig) -> Result<Vec<TraceRecord>, RunFailure> {
    run_bo_with(strategy, problem, cfg, &mut |_| Ok(()))
}

/// Like [`run_bo`] but hands every record to `sink` as soon as it exists.
pub fn run_bo_with(
    strategy: StrategyKind,
    problem: &dyn Problem,
    cfg: &RunConfig,
    sink: &mut dyn FnMut(&TraceRecord) -> Result<(), std::io::Error>,
) -> Result<Vec<TraceRecord>, RunFailure> {
    let mut trace = Vec::new();
    match drive(strategy, problem, cfg, sink, &mut trace) {
        Ok(()) => Ok(trace),
        Err(error) => Err(RunFailure { error, partial: trace }),
    }
}

fn drive(
    strategy: StrategyKind,
    problem: &dyn Problem,
    cfg: &RunConfig,
    sink: &mut dyn FnMut(&TraceRecord) -> Result<(), std::io::Error>,
    trace: &mut Vec<TraceRecord>,
) -> Result<(), EngineError> {
    let mut streams = Streams::new(cfg.seed);
    let space = problem.space();
    let init = initial_queries(strategy, space, cfg, &mut streams.design)?;
    let mut history: Vec<Observation> = Vec::new();
    let mut cum_cost = 0.0;
    let mut objective: Option<GpEnsemble> = None;

    let fit = |history: &[Observation], kind: KernelKind, rng: &mut Rng| -> Result<GpEnsemble, EngineError> {
        let data: Arc<[Observation]> = history.to_vec().into();
        Ok(fit_ensemble(data, kind, &cfg.priors, &cfg.mcmc, rng)?)
    };

    let total = init.len() + cfg.n_bo;
    let mut init_iter = init.into_iter();
    for iter in 0..total {
        let (query, phase) = match init_iter.next() {
            Some(q) => (q, Phase::Init),
            None => {
                let obj = objective.as_ref().expect("fitted after initialization");
                let cost = if strategy.cost_aware() { Some(fit(&history, KernelKind::Cost, &mut streams.mcmc)?) } else { None };
                let state = SurrogateState { objective: obj, cost: cost.as_ref() };
                (propose(strategy, space, &state, cfg, &mut streams.propose)?, Phase::Bo)
            }
        };
        let result = problem.evaluate(&query.x, &query.fidelity, &mut streams.eval)?;
        history.push(Observation::new(query.x.clone(), query.model_t, result.y, result.cost)?);
        cum_cost += result.cost;

        let ens = fit(&history, KernelKind::Objective, &mut streams.mcmc)?;
        let (_, inc_x, inc_pred) = incumbent(&ens, &history)?;
        objective = Some(ens);

        let record = TraceRecord {
            schema_version: TRACE_SCHEMA_VERSION,
            problem: problem.name().to_string(),
            strategy,
            seed: cfg.seed,
            iter,
            phase,
            x: space.to_raw(&query.x)?,
            t: query.model_t.value(),
            task: query.task_label(strategy),
            presample_factor: query.fidelity.presample_factor,
            data_fraction: query.fidelity.data_fraction,
            y: result.y,
            cost: result.cost,
            cum_cost,
            wall_seconds: result.wall_seconds,
            incumbent_x: space.to_raw(&inc_x)?,
            incumbent_pred: inc_pred,
            incumbent_true: problem.true_value(&inc_x)?,
        };
        sink(&record)?;
        trace.push(record);
    }
    Ok(())
}

/// Normalized task back to presample factor or dataset fraction.
pub fn denormalize_task(strategy: StrategyKind, t: TaskValue) -> f64 {
    match strategy {
        StrategyKind::Fabolas | StrategyKind::FabolasIs => data_fraction(t),
        _ => presample_factor(t),
    }
}
