use indexmap::IndexMap;
use ndarray::{ArrayD, IxDyn};

use super::{Array, ArraySpec, DType, EnvError, Environment, Observation, TimeStep};
use crate::physics::{CameraSel, Physics, RenderMode};

pub const PIXELS_KEY: &str = "pixels";
pub const FLAT_KEY: &str = "observations";

/// Adds a rendered RGB image to every observation, optionally replacing the
/// original features.
pub struct PixelWrapper<E> {
    env: E,
    pixels_only: bool,
    width: usize,
    height: usize,
    camera: CameraSel,
}

impl<E: Environment> PixelWrapper<E> {
    pub fn new(env: E, pixels_only: bool, width: usize, height: usize, camera: CameraSel) -> Result<Self, EnvError> {
        if env.physics().is_none() {
            return Err(EnvError::Invalid("pixel observations need an environment with physics".into()));
        }
        if !pixels_only && env.observation_spec().contains_key(PIXELS_KEY) {
            return Err(EnvError::Invalid(format!("observation '{PIXELS_KEY}' already exists")));
        }
        Ok(PixelWrapper {
            env,
            pixels_only,
            width,
            height,
            camera,
        })
    }

    pub fn inner(&self) -> &E {
        &self.env
    }

    fn augment(&mut self, mut ts: TimeStep) -> Result<TimeStep, EnvError> {
        let (w, h, cam) = (self.width, self.height, self.camera.clone());
        let physics = self.env.physics_mut().expect("checked at construction");
        let img = physics.render(w, h, cam, RenderMode::Rgb)?;
        let bytes = img.as_rgb().expect("rgb mode").to_bytes();
        let pixels = Array::U8(ArrayD::from_shape_vec(IxDyn(&[h, w, 3]), bytes).unwrap());
        if self.pixels_only {
            ts.observation.clear();
        }
        ts.observation.insert(PIXELS_KEY.to_string(), pixels);
        Ok(ts)
    }
}

impl<E: Environment> Environment for PixelWrapper<E> {
    fn reset(&mut self) -> Result<TimeStep, EnvError> {
        let ts = self.env.reset()?;
        self.augment(ts)
    }

    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        let ts = self.env.step(action)?;
        self.augment(ts)
    }

    fn action_spec(&self) -> ArraySpec {
        self.env.action_spec()
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        let mut spec = if self.pixels_only {
            IndexMap::new()
        } else {
            self.env.observation_spec()
        };
        let mut px = ArraySpec::new(PIXELS_KEY, &[self.height, self.width, 3]).with_dtype(DType::U8);
        px.minimum = Some(vec![0.0]);
        px.maximum = Some(vec![255.0]);
        spec.insert(PIXELS_KEY.to_string(), px);
        spec
    }

    fn physics(&self) -> Option<&Physics> {
        self.env.physics()
    }

    fn physics_mut(&mut self) -> Option<&mut Physics> {
        self.env.physics_mut()
    }
}

/// Concatenates all observations, in spec order, into one f64 vector.
pub struct FlattenWrapper<E> {
    env: E,
    spec: IndexMap<String, ArraySpec>,
}

impl<E: Environment> FlattenWrapper<E> {
    pub fn new(env: E) -> Self {
        let spec = env.observation_spec();
        FlattenWrapper { env, spec }
    }

    pub fn inner(&self) -> &E {
        &self.env
    }

    pub fn flatten(&self, obs: &Observation) -> Vec<f64> {
        self.spec
            .keys()
            .flat_map(|k| obs[k].to_f64_vec())
            .collect()
    }

    /// Splits a flat vector back into named arrays.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Observation, EnvError> {
        let total: usize = self.spec.values().map(ArraySpec::size).sum();
        if flat.len() != total {
            return Err(EnvError::Invalid(format!(
                "flat observation has {} values, expected {total}",
                flat.len()
            )));
        }
        let mut out = Observation::new();
        let mut at = 0;
        for (k, s) in &self.spec {
            let chunk = &flat[at..at + s.size()];
            at += s.size();
            let arr = match s.dtype {
                DType::F64 => Array::F64(ArrayD::from_shape_vec(IxDyn(&s.shape), chunk.to_vec()).unwrap()),
                DType::U8 => Array::U8(
                    ArrayD::from_shape_vec(IxDyn(&s.shape), chunk.iter().map(|&x| x as u8).collect()).unwrap(),
                ),
            };
            out.insert(k.clone(), arr);
        }
        Ok(out)
    }

    fn wrap(&self, mut ts: TimeStep) -> TimeStep {
        let flat = self.flatten(&ts.observation);
        ts.observation = Observation::from([(FLAT_KEY.to_string(), Array::vector(flat))]);
        ts
    }
}

impl<E: Environment> Environment for FlattenWrapper<E> {
    fn reset(&mut self) -> Result<TimeStep, EnvError> {
        let ts = self.env.reset()?;
        Ok(self.wrap(ts))
    }

    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        let ts = self.env.step(action)?;
        Ok(self.wrap(ts))
    }

    fn action_spec(&self) -> ArraySpec {
        self.env.action_spec()
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        let total = self.spec.values().map(ArraySpec::size).sum::<usize>();
        IndexMap::from([(FLAT_KEY.to_string(), ArraySpec::new(FLAT_KEY, &[total]))])
    }

    fn physics(&self) -> Option<&Physics> {
        self.env.physics()
    }

    fn physics_mut(&mut self) -> Option<&mut Physics> {
        self.env.physics_mut()
    }
}
