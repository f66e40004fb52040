use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EvalResult, Fidelity, Problem, ProblemError};
use crate::rng::Rng;
use crate::space::{ConfigPoint, Dimension, Scale, SearchSpace, TaskValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticFunction {
    Branin,
    Hartmann3,
}

impl SyntheticFunction {
    pub fn name(self) -> &'static str {
        match self {
            Self::Branin => "branin-mf",
            Self::Hartmann3 => "hartmann3-mf",
        }
    }

    pub fn space(self) -> SearchSpace {
        let dims = match self {
            Self::Branin => vec![
                Dimension::continuous("x1", -5.0, 10.0, Scale::Linear),
                Dimension::continuous("x2", 0.0, 15.0, Scale::Linear),
            ],
            Self::Hartmann3 => (1..=3).map(|i| Dimension::continuous(&format!("x{i}"), 0.0, 1.0, Scale::Linear)).collect(),
        };
        SearchSpace::new(dims).expect("static bounds")
    }

    pub fn eval_raw(self, raw: &[f64]) -> f64 {
        match self {
            Self::Branin => branin(raw[0], raw[1]),
            Self::Hartmann3 => hartmann3([raw[0], raw[1], raw[2]]),
        }
    }

    pub fn minimum(self) -> f64 {
        match self {
            Self::Branin => 0.397_887_357_729_738,
            Self::Hartmann3 => -3.862_779_787_332_77,
        }
    }
}

pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let s = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - s) * x1.cos() + 10.0
}

pub fn hartmann3(x: [f64; 3]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
    const P: [[f64; 3]; 4] = [
        [0.3689, 0.1170, 0.2673],
        [0.4699, 0.4387, 0.7470],
        [0.1091, 0.8732, 0.5547],
        [0.0381, 0.5743, 0.8828],
    ];
    -(0..4)
        .map(|i| {
            let e: f64 = (0..3).map(|j| A[i][j] * (x[j] - P[i][j]).powi(2)).sum();
            ALPHA[i] * (-e).exp()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Scale of the low-fidelity upward bias.
    pub bias: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub cost0: f64,
    pub cost_slope: f64,
    pub noise: bool,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self { bias: 2.0, sigma0: 0.2, sigma1: 0.01, cost0: 1.0, cost_slope: 4.0, noise: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem {
    function: SyntheticFunction,
    space: SearchSpace,
    params: SyntheticParams,
}

impl SyntheticProblem {
    pub fn new(function: SyntheticFunction, params: SyntheticParams) -> Self {
        Self { function, space: function.space(), params }
    }

    pub fn function(&self) -> SyntheticFunction {
        self.function
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    /// Positive bias shape in `[0.5, 1.5]`, driven by the first coordinate.
    pub fn bias_shape(x: &ConfigPoint) -> f64 {
        1.0 + 0.5 * (2.0 * PI * x.coords()[0]).sin()
    }

    pub fn cost(&self, t: TaskValue) -> f64 {
        self.params.cost0 * (1.0 + self.params.cost_slope * t.value())
    }
}

/// `y = f(x) + (1-t)·β·|g(x)| + ε` with `ε ~ N(0, (σ₀(1-t) + σ₁)²)` and cost
/// `c₀(1 + γt)`.
pub fn synthetic_eval(problem: &SyntheticProblem, x: &ConfigPoint, t: TaskValue, rng: &mut Rng) -> Result<EvalResult, ProblemError> {
    problem.space.check(x)?;
    let p = &problem.params;
    let gap = 1.0 - t.value();
    let f = problem.function.eval_raw(&problem.space.to_raw(x)?);
    let mut y = f + gap * p.bias * SyntheticProblem::bias_shape(x).abs();
    if p.noise {
        let sd = p.sigma0 * gap + p.sigma1;
        if sd > 0.0 {
            y += Normal::new(0.0, sd).expect("positive sd").sample(rng);
        }
    }
    Ok(EvalResult { y, cost: problem.cost(t), wall_seconds: 0.0, diagnostics: None })
}

impl Problem for SyntheticProblem {
    fn name(&self) -> &str {
        self.function.name()
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &ConfigPoint, fidelity: &Fidelity, rng: &mut Rng) -> Result<EvalResult, ProblemError> {
        synthetic_eval(self, x, fidelity.t, rng)
    }

    fn true_value(&self, x: &ConfigPoint) -> Result<f64, ProblemError> {
        Ok(self.function.eval_raw(&self.space.to_raw(x)?))
    }

    fn optimum(&self) -> Option<f64> {
        Some(self.function.minimum())
    }
}
