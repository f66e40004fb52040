//! Search spaces and points in the normalized unit cube.
//!
//! Every optimizer-facing coordinate lives in `[0, 1]`. Log-scaled
//! dimensions are mapped through `ln` before normalization, so a uniform
//! draw in unit space is log-uniform in raw space.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("search space has no dimensions")]
    Empty,
    #[error("dimension `{name}`: lower bound {lower} must be below upper bound {upper}")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("dimension `{name}`: log scale requires a positive lower bound, got {lower}")]
    NonPositiveLogBound { name: String, lower: f64 },
    #[error("coordinate {index} = {value} lies outside [0, 1]")]
    OutOfUnitRange { index: usize, value: f64 },
    #[error("expected {expected} coordinates, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("task value {0} lies outside [0, 1]")]
    TaskOutOfRange(f64),
    #[error("raw value {value} for `{name}` lies outside [{lower}, {upper}]")]
    RawOutOfBounds { name: String, value: f64, lower: f64, upper: f64 },
}

/// A point of the search space in normalized `[0, 1]^d` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ConfigPoint(Vec<f64>);

impl ConfigPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        for (index, &value) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SpaceError::OutOfUnitRange { index, value });
            }
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for ConfigPoint {
    type Error = SpaceError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ConfigPoint> for Vec<f64> {
    fn from(p: ConfigPoint) -> Self {
        p.0
    }
}

/// Normalized task (fidelity) variable; `1.0` is the target task.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TaskValue(f64);

impl TaskValue {
    pub const TARGET: TaskValue = TaskValue(1.0);

    pub fn new(t: f64) -> Result<Self, SpaceError> {
        if (0.0..=1.0).contains(&t) {
            Ok(Self(t))
        } else {
            Err(SpaceError::TaskOutOfRange(t))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_target(self) -> bool {
        self.0 == 1.0
    }
}

impl TryFrom<f64> for TaskValue {
    type Error = SpaceError;
    fn try_from(t: f64) -> Result<Self, Self::Error> {
        Self::new(t)
    }
}

impl From<TaskValue> for f64 {
    fn from(t: TaskValue) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    pub kind: DimKind,
}

impl Dimension {
    pub fn continuous(name: &str, lower: f64, upper: f64, scale: Scale) -> Self {
        Self { name: name.to_string(), lower, upper, scale, kind: DimKind::Continuous }
    }

    pub fn integer(name: &str, lower: f64, upper: f64, scale: Scale) -> Self {
        Self { name: name.to_string(), lower, upper, scale, kind: DimKind::Integer }
    }

    fn warped_bounds(&self) -> (f64, f64) {
        match self.scale {
            Scale::Linear => (self.lower, self.upper),
            Scale::Log => (self.lower.ln(), self.upper.ln()),
        }
    }

    pub fn to_raw(&self, u: f64) -> f64 {
        let (lo, hi) = self.warped_bounds();
        let w = lo + u * (hi - lo);
        let raw = match self.scale {
            Scale::Linear => w,
            Scale::Log => w.exp(),
        };
        let raw = raw.clamp(self.lower, self.upper);
        match self.kind {
            DimKind::Continuous => raw,
            DimKind::Integer => raw.round().clamp(self.lower.ceil(), self.upper.floor()),
        }
    }

    pub fn to_unit(&self, raw: f64) -> Result<f64, SpaceError> {
        if !(self.lower..=self.upper).contains(&raw) {
            return Err(SpaceError::RawOutOfBounds {
                name: self.name.clone(),
                value: raw,
                lower: self.lower,
                upper: self.upper,
            });
        }
        let (lo, hi) = self.warped_bounds();
        let w = match self.scale {
            Scale::Linear => raw,
            Scale::Log => raw.ln(),
        };
        Ok(((w - lo) / (hi - lo)).clamp(0.0, 1.0))
    }
}

/// Bounded hyperparameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, SpaceError> {
        if dims.is_empty() {
            return Err(SpaceError::Empty);
        }
        for d in &dims {
            if !(d.lower < d.upper) {
                return Err(SpaceError::InvertedBounds {
                    name: d.name.clone(),
                    lower: d.lower,
                    upper: d.upper,
                });
            }
            if d.scale == Scale::Log && d.lower <= 0.0 {
                return Err(SpaceError::NonPositiveLogBound { name: d.name.clone(), lower: d.lower });
            }
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn check(&self, x: &ConfigPoint) -> Result<(), SpaceError> {
        if x.dim() != self.dim() {
            return Err(SpaceError::DimensionMismatch { expected: self.dim(), actual: x.dim() });
        }
        Ok(())
    }

    pub fn to_raw(&self, x: &ConfigPoint) -> Result<Vec<f64>, SpaceError> {
        self.check(x)?;
        Ok(self.dims.iter().zip(x.coords()).map(|(d, &u)| d.to_raw(u)).collect())
    }

    pub fn to_unit(&self, raw: &[f64]) -> Result<ConfigPoint, SpaceError> {
        if raw.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch { expected: self.dim(), actual: raw.len() });
        }
        let coords = self
            .dims
            .iter()
            .zip(raw)
            .map(|(d, &r)| d.to_unit(r))
            .collect::<Result<Vec<_>, _>>()?;
        ConfigPoint::new(coords)
    }

    /// Uniform point in unit space, strictly inside the box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ConfigPoint {
        ConfigPoint(self.dims.iter().map(|_| rng.random::<f64>()).collect())
    }
}
