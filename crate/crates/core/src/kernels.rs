//! Product kernels over (configuration, task) pairs.
//!
//! Both surrogates share a Matérn-5/2 kernel over configurations. They
//! differ in the task factor: the objective factor `(1-t)^ν (1-t')^ν + 1`
//! collapses to 1 on the target task, while the cost factor
//! `t^λ t'^λ + 1` grows with the task value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Task exponent of the objective kernel.
pub const OBJECTIVE_TASK_EXPONENT: f64 = 2.0;
/// Task exponent of the cost kernel.
pub const COST_TASK_EXPONENT: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: {left} vs {right} coordinates ({lengthscales} lengthscales)")]
    DimensionMismatch { left: usize, right: usize, lengthscales: usize },
    #[error("lengthscale {index} must be positive and finite, got {value}")]
    InvalidLengthscale { index: usize, value: f64 },
    #[error("amplitude must be positive and finite, got {0}")]
    InvalidAmplitude(f64),
    #[error("task exponent must be positive and finite, got {0}")]
    InvalidTaskExponent(f64),
    #[error("task value {0} lies outside [0, 1]")]
    TaskOutOfRange(f64),
    #[error("kernel of kind {actual:?} used where {expected:?} was required")]
    WrongKind { expected: KernelKind, actual: KernelKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Objective,
    Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    lengthscales: Vec<f64>,
    amplitude: f64,
    task_exponent: f64,
    kind: KernelKind,
}

impl KernelSpec {
    pub fn new(
        lengthscales: Vec<f64>,
        amplitude: f64,
        task_exponent: f64,
        kind: KernelKind,
    ) -> Result<Self, KernelError> {
        for (index, &value) in lengthscales.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(KernelError::InvalidLengthscale { index, value });
            }
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(KernelError::InvalidAmplitude(amplitude));
        }
        if !(task_exponent > 0.0 && task_exponent.is_finite()) {
            return Err(KernelError::InvalidTaskExponent(task_exponent));
        }
        Ok(Self { lengthscales, amplitude, task_exponent, kind })
    }

    /// Objective kernel with the default task exponent.
    pub fn objective(lengthscales: Vec<f64>, amplitude: f64) -> Result<Self, KernelError> {
        Self::new(lengthscales, amplitude, OBJECTIVE_TASK_EXPONENT, KernelKind::Objective)
    }

    /// Cost kernel with the default task exponent.
    pub fn cost(lengthscales: Vec<f64>, amplitude: f64) -> Result<Self, KernelError> {
        Self::new(lengthscales, amplitude, COST_TASK_EXPONENT, KernelKind::Cost)
    }

    pub fn with_kind(kind: KernelKind, lengthscales: Vec<f64>, amplitude: f64) -> Result<Self, KernelError> {
        match kind {
            KernelKind::Objective => Self::objective(lengthscales, amplitude),
            KernelKind::Cost => Self::cost(lengthscales, amplitude),
        }
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn task_exponent(&self) -> f64 {
        self.task_exponent
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn task_factor(&self, t: f64, t2: f64) -> f64 {
        let p = self.task_exponent;
        match self.kind {
            KernelKind::Objective => (1.0 - t).powf(p) * (1.0 - t2).powf(p) + 1.0,
            KernelKind::Cost => t.powf(p) * t2.powf(p) + 1.0,
        }
    }

    /// Unchecked evaluation; callers guarantee matching dimensions and
    /// task values in `[0, 1]`.
    pub(crate) fn eval_unchecked(&self, x: &[f64], t: f64, x2: &[f64], t2: f64) -> f64 {
        matern52_unchecked(x, x2, &self.lengthscales, self.amplitude) * self.task_factor(t, t2)
    }

    /// Prior variance `k((x,t),(x,t))` of a point on task `t`.
    pub(crate) fn prior_var(&self, t: f64) -> f64 {
        self.amplitude * self.amplitude * self.task_factor(t, t)
    }

    pub fn eval(&self, a: (&[f64], f64), b: (&[f64], f64)) -> Result<f64, KernelError> {
        check_task(a.1)?;
        check_task(b.1)?;
        let m = matern52(a.0, b.0, &self.lengthscales, self.amplitude)?;
        Ok(m * self.task_factor(a.1, b.1))
    }
}

fn check_task(t: f64) -> Result<(), KernelError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(KernelError::TaskOutOfRange(t))
    }
}

#[inline]
fn matern52_unchecked(x: &[f64], x2: &[f64], lengthscales: &[f64], amplitude: f64) -> f64 {
    let r2: f64 = x
        .iter()
        .zip(x2)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum();
    let sr = (5.0 * r2).sqrt();
    amplitude * amplitude * (1.0 + sr + 5.0 * r2 / 3.0) * (-sr).exp()
}

/// Matérn-5/2 kernel `a² (1 + √5 r + 5r²/3) exp(-√5 r)` with `r` the
/// lengthscale-scaled Euclidean distance.
pub fn matern52(x: &[f64], x2: &[f64], lengthscales: &[f64], amplitude: f64) -> Result<f64, KernelError> {
    if x.len() != x2.len() || x.len() != lengthscales.len() {
        return Err(KernelError::DimensionMismatch {
            left: x.len(),
            right: x2.len(),
            lengthscales: lengthscales.len(),
        });
    }
    for (index, &value) in lengthscales.iter().enumerate() {
        if !(value > 0.0) {
            return Err(KernelError::InvalidLengthscale { index, value });
        }
    }
    Ok(matern52_unchecked(x, x2, lengthscales, amplitude))
}

pub fn kernel_objective(a: (&[f64], f64), b: (&[f64], f64), spec: &KernelSpec) -> Result<f64, KernelError> {
    if spec.kind != KernelKind::Objective {
        return Err(KernelError::WrongKind { expected: KernelKind::Objective, actual: spec.kind });
    }
    spec.eval(a, b)
}

pub fn kernel_cost(a: (&[f64], f64), b: (&[f64], f64), spec: &KernelSpec) -> Result<f64, KernelError> {
    if spec.kind != KernelKind::Cost {
        return Err(KernelError::WrongKind { expected: KernelKind::Cost, actual: spec.kind });
    }
    spec.eval(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matern_identity_and_unit_distance() {
        assert_eq!(matern52(&[0.3, 0.1], &[0.3, 0.1], &[0.2, 5.0], 1.0).unwrap(), 1.0);
        // (1 + √5 + 5/3)·exp(−√5), evaluated with mpmath at 30 digits.
        let v = matern52(&[0.0], &[0.7], &[0.7], 1.0).unwrap();
        assert!((v - 0.523_994_108_831_820_3).abs() < 1e-12, "{v}");
        let far = matern52(&[0.0], &[50.0], &[1.0], 1.0).unwrap();
        assert!(far < 1e-20);
    }

    #[test]
    fn matern_errors() {
        assert!(matches!(
            matern52(&[0.0], &[0.0, 1.0], &[1.0], 1.0),
            Err(KernelError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            matern52(&[0.0], &[1.0], &[0.0], 1.0),
            Err(KernelError::InvalidLengthscale { index: 0, .. })
        ));
        assert!(KernelSpec::objective(vec![-1.0], 1.0).is_err());
        assert!(KernelSpec::objective(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn objective_task_factor_values() {
        let s = KernelSpec::objective(vec![0.5], 1.0).unwrap();
        let x = [0.2];
        let x2 = [0.6];
        let m = matern52(&x, &x2, &[0.5], 1.0).unwrap();
        assert_eq!(kernel_objective((&x, 1.0), (&x2, 1.0), &s).unwrap(), m);
        assert_eq!(kernel_objective((&x, 0.0), (&x, 0.0), &s).unwrap(), 2.0);
        assert_eq!(kernel_objective((&x, 0.5), (&x, 0.5), &s).unwrap(), 1.0625);
        assert!(matches!(
            kernel_objective((&x, 1.5), (&x, 0.5), &s),
            Err(KernelError::TaskOutOfRange(_))
        ));
        assert!(kernel_cost((&x, 0.5), (&x, 0.5), &s).is_err());
    }

    #[test]
    fn cost_task_factor_values() {
        let s = KernelSpec::cost(vec![0.5], 1.0).unwrap();
        let x = [0.4];
        assert_eq!(kernel_cost((&x, 1.0), (&x, 1.0), &s).unwrap(), 2.0);
        assert_eq!(s.task_factor(0.0, 0.0), 1.0);
        assert_eq!(kernel_cost((&x, 0.5), (&x, 1.0), &s).unwrap(), 1.5);
    }

    proptest! {
        #[test]
        fn kernels_are_symmetric(
            a in proptest::collection::vec(0.0f64..1.0, 3),
            b in proptest::collection::vec(0.0f64..1.0, 3),
            ls in proptest::collection::vec(0.05f64..3.0, 3),
            amp in 0.1f64..3.0,
            t in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let fo = KernelSpec::objective(ls.clone(), amp).unwrap();
            let fc = KernelSpec::cost(ls, amp).unwrap();
            prop_assert_eq!(
                kernel_objective((&a, t), (&b, t2), &fo).unwrap(),
                kernel_objective((&b, t2), (&a, t), &fo).unwrap()
            );
            prop_assert_eq!(
                kernel_cost((&a, t), (&b, t2), &fc).unwrap(),
                kernel_cost((&b, t2), (&a, t), &fc).unwrap()
            );
        }
    }
}
