//! Agent-facing environment contract: time steps, array specs, the
//! [`Environment`] trait, reward shaping and observation wrappers.

mod reward;
mod wrappers;

use indexmap::IndexMap;
use ndarray::{ArrayD, IxDyn};
use thiserror::Error;

use crate::engine::EngineError;
use crate::modeldom::ModelError;
use crate::physics::{Physics, PhysicsError};

pub use reward::{sigmoid, tolerance, Sigmoid, Tolerance, ToleranceError};
pub use wrappers::{FlattenWrapper, PixelWrapper, FLAT_KEY, PIXELS_KEY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepType {
    First,
    Mid,
    Last,
}

/// A numeric array of one of the supported element types.
#[derive(Clone, Debug, PartialEq)]
pub enum Array {
    F64(ArrayD<f64>),
    U8(ArrayD<u8>),
}

impl Array {
    pub fn vector(v: Vec<f64>) -> Array {
        let n = v.len();
        Array::F64(ArrayD::from_shape_vec(IxDyn(&[n]), v).unwrap())
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Array::F64(a) => a.shape(),
            Array::U8(a) => a.shape(),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            Array::F64(_) => DType::F64,
            Array::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in row-major order, widened to f64.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            Array::F64(a) => a.iter().copied().collect(),
            Array::U8(a) => a.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn as_f64(&self) -> Option<&ArrayD<f64>> {
        match self {
            Array::F64(a) => Some(a),
            Array::U8(_) => None,
        }
    }
}

pub type Observation = IndexMap<String, Array>;

#[derive(Clone, Debug, PartialEq)]
pub struct TimeStep {
    pub step_type: StepType,
    /// Absent on the first step of an episode.
    pub reward: Option<f64>,
    /// Absent on the first step of an episode.
    pub discount: Option<f64>,
    pub observation: Observation,
}

impl TimeStep {
    pub fn first(observation: Observation) -> TimeStep {
        TimeStep {
            step_type: StepType::First,
            reward: None,
            discount: None,
            observation,
        }
    }

    pub fn transition(reward: f64, discount: f64, observation: Observation) -> TimeStep {
        TimeStep {
            step_type: StepType::Mid,
            reward: Some(reward),
            discount: Some(discount),
            observation,
        }
    }

    pub fn termination(reward: f64, discount: f64, observation: Observation) -> TimeStep {
        TimeStep {
            step_type: StepType::Last,
            reward: Some(reward),
            discount: Some(discount),
            observation,
        }
    }

    pub fn is_first(&self) -> bool {
        self.step_type == StepType::First
    }

    pub fn is_last(&self) -> bool {
        self.step_type == StepType::Last
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F64,
    U8,
}

/// Shape, element type and optional elementwise bounds of an array. Bounds
/// hold either one value (broadcast) or one value per element.
#[derive(Clone, Debug, PartialEq)]
pub struct ArraySpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub minimum: Option<Vec<f64>>,
    pub maximum: Option<Vec<f64>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("{name}: expected shape {expected:?}, got {got:?}")]
    Shape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("{name}: expected dtype {expected:?}, got {got:?}")]
    DType { name: String, expected: DType, got: DType },
    #[error("{name}: values at indices {indices:?} violate the {bound}")]
    Bounds { name: String, indices: Vec<usize>, bound: String },
    #[error("{name}: bounds of length {len} do not broadcast to {size} elements")]
    Broadcast { name: String, len: usize, size: usize },
    #[error("{name}: minimum exceeds maximum at index {index}")]
    Inverted { name: String, index: usize },
}

impl ArraySpec {
    pub fn new(name: &str, shape: &[usize]) -> ArraySpec {
        ArraySpec {
            name: name.to_string(),
            shape: shape.to_vec(),
            dtype: DType::F64,
            minimum: None,
            maximum: None,
        }
    }

    pub fn bounded(name: &str, shape: &[usize], minimum: Vec<f64>, maximum: Vec<f64>) -> Result<ArraySpec, SpecError> {
        let spec = ArraySpec {
            minimum: Some(minimum),
            maximum: Some(maximum),
            ..ArraySpec::new(name, shape)
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_dtype(mut self, dtype: DType) -> ArraySpec {
        self.dtype = dtype;
        self
    }

    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    fn bound_at(b: &[f64], i: usize) -> f64 {
        if b.len() == 1 {
            b[0]
        } else {
            b[i]
        }
    }

    /// Validates the bounds themselves.
    pub fn check(&self) -> Result<(), SpecError> {
        let size = self.size();
        for b in self.minimum.iter().chain(&self.maximum) {
            if b.len() != 1 && b.len() != size {
                return Err(SpecError::Broadcast {
                    name: self.name.clone(),
                    len: b.len(),
                    size,
                });
            }
        }
        if let (Some(lo), Some(hi)) = (&self.minimum, &self.maximum) {
            for i in 0..size {
                if Self::bound_at(lo, i) > Self::bound_at(hi, i) {
                    return Err(SpecError::Inverted {
                        name: self.name.clone(),
                        index: i,
                    });
                }
            }
        }
        Ok(())
    }

    fn check_bounds(&self, values: &[f64]) -> Result<(), SpecError> {
        for (bound, b, below) in [("minimum", &self.minimum, true), ("maximum", &self.maximum, false)] {
            let Some(b) = b else { continue };
            let indices: Vec<usize> = values
                .iter()
                .enumerate()
                .filter(|&(i, &v)| {
                    let lim = Self::bound_at(b, i);
                    v.is_nan() || if below { v < lim } else { v > lim }
                })
                .map(|(i, _)| i)
                .collect();
            if !indices.is_empty() {
                return Err(SpecError::Bounds {
                    name: self.name.clone(),
                    indices,
                    bound: bound.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Checks a flat vector against shape and bounds.
    pub fn validate_flat(&self, values: &[f64]) -> Result<(), SpecError> {
        if values.len() != self.size() {
            return Err(SpecError::Shape {
                name: self.name.clone(),
                expected: self.shape.clone(),
                got: vec![values.len()],
            });
        }
        self.check_bounds(values)
    }

    pub fn validate(&self, value: &Array) -> Result<(), SpecError> {
        if value.dtype() != self.dtype {
            return Err(SpecError::DType {
                name: self.name.clone(),
                expected: self.dtype,
                got: value.dtype(),
            });
        }
        if value.shape() != self.shape.as_slice() {
            return Err(SpecError::Shape {
                name: self.name.clone(),
                expected: self.shape.clone(),
                got: value.shape().to_vec(),
            });
        }
        self.check_bounds(&value.to_f64_vec())
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid action: {0}")]
    Action(#[from] SpecError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reward(#[from] ToleranceError),
    #[error("{callback} of {owner} failed: {source}")]
    Callback {
        callback: &'static str,
        owner: String,
        #[source]
        source: Box<EnvError>,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Other(Box<dyn std::error::Error + Send + Sync>),
}

impl From<EngineError> for EnvError {
    fn from(e: EngineError) -> Self {
        EnvError::Physics(PhysicsError::Engine(e))
    }
}

/// A reinforcement-learning environment. After a `Last` step the next call
/// to [`Environment::step`] starts a new episode and returns `First`.
pub trait Environment {
    fn reset(&mut self) -> Result<TimeStep, EnvError>;
    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError>;
    fn action_spec(&self) -> ArraySpec;
    fn observation_spec(&self) -> IndexMap<String, ArraySpec>;

    /// The underlying simulation, for environments that have one.
    fn physics(&self) -> Option<&Physics> {
        None
    }

    fn physics_mut(&mut self) -> Option<&mut Physics> {
        None
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn reset(&mut self) -> Result<TimeStep, EnvError> {
        (**self).reset()
    }
    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        (**self).step(action)
    }
    fn action_spec(&self) -> ArraySpec {
        (**self).action_spec()
    }
    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        (**self).observation_spec()
    }
    fn physics(&self) -> Option<&Physics> {
        (**self).physics()
    }
    fn physics_mut(&mut self) -> Option<&mut Physics> {
        (**self).physics_mut()
    }
}
