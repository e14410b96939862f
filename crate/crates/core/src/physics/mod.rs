//! Simulation facade over the engine: stepping with a fixed stage order,
//! reset contexts, name-based access to arrays, element binding and
//! software rendering.
//!
//! After [`Physics::step`] the position-dependent quantities (frames,
//! joint sensors, rendered images) describe the new state, while forces and
//! accelerations still describe the transition that produced it.

mod fields;
mod render;

use thiserror::Error;

use crate::engine::{self, CompiledModel, Data, EngineError};
use crate::modeldom::{ElementRef, ModelRoot, Namespace};

pub use fields::{Binding, Field, NamedView, NamedViewMut};
pub use render::{CameraSel, Grid, Image, RenderMode};

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("no {namespace} named '{name}'")]
    UnknownName { namespace: Namespace, name: String },
    #[error("{namespace} index {index} out of range (have {len})")]
    IndexOutOfRange { namespace: Namespace, index: usize, len: usize },
    #[error("{namespace} elements have no field '{field}'")]
    UnknownField { namespace: Namespace, field: String },
    #[error("unknown column '{column}' (expected one of {expected:?})")]
    UnknownColumn { column: String, expected: Vec<&'static str> },
    #[error("field '{0}' is read-only")]
    ReadOnly(String),
    #[error("{what}: expected {expected} values, got {got}")]
    Shape { what: String, expected: usize, got: usize },
    #[error("cannot bind elements from different namespaces ({0} and {1})")]
    MixedNamespaces(Namespace, Namespace),
    #[error("element {0:?} is not part of this compiled model")]
    StaleElement(ElementRef),
    #[error("unknown camera '{0}'")]
    UnknownCamera(String),
    #[error("image size must be at least 1x1, got {0}x{1}")]
    ImageSize(usize, usize),
}

pub type Result<T> = std::result::Result<T, PhysicsError>;

/// How much of the derived data is current with respect to the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// State was modified since the last recomputation.
    Invalid,
    /// Frames, inertia and sensors match the state; forces and `qacc` may
    /// refer to the previous transition or to an older control.
    Position,
    /// Everything including `qacc` matches the current state and controls.
    Full,
}

/// Minimal state needed to restore a simulation exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub qpos: Vec<f64>,
    pub qvel: Vec<f64>,
    pub ctrl: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Physics {
    model: CompiledModel,
    data: Data,
    stage: Stage,
}

impl Physics {
    pub fn from_model(root: &ModelRoot) -> Result<Physics> {
        Physics::new(engine::compile(root)?)
    }

    pub fn from_xml(xml: &str) -> Result<Physics> {
        let root = ModelRoot::from_xml(xml).map_err(EngineError::from)?;
        Physics::from_model(&root)
    }

    pub fn new(model: CompiledModel) -> Result<Physics> {
        let data = Data::new(&model);
        let mut p = Physics {
            model,
            data,
            stage: Stage::Invalid,
        };
        p.forward()?;
        Ok(p)
    }

    pub fn model(&self) -> &CompiledModel {
        &self.model
    }

    /// Mutable model access. Marks derived data as stale.
    pub fn model_mut(&mut self) -> &mut CompiledModel {
        self.stage = Stage::Invalid;
        &mut self.model
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    /// Mutable state access. Marks derived data as stale.
    pub fn data_mut(&mut self) -> &mut Data {
        self.stage = Stage::Invalid;
        &mut self.data
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn time(&self) -> f64 {
        self.data.time
    }

    pub fn timestep(&self) -> f64 {
        self.model.opt.timestep
    }

    /// Recomputes all derived quantities for the current state.
    pub fn forward(&mut self) -> Result<()> {
        engine::forward(&self.model, &mut self.data)?;
        self.stage = Stage::Full;
        Ok(())
    }

    /// Brings position-stage quantities up to date if the state changed.
    pub fn ensure_position(&mut self) -> Result<()> {
        if self.stage == Stage::Invalid {
            engine::position_stage(&self.model, &mut self.data)?;
            self.stage = Stage::Position;
        }
        Ok(())
    }

    /// Advances `n_sub` physics timesteps with the current controls.
    pub fn step(&mut self, n_sub: usize) -> Result<()> {
        for _ in 0..n_sub {
            if self.stage != Stage::Full {
                self.forward()?;
            }
            let r = engine::integrate(&self.model, &mut self.data);
            self.stage = Stage::Position;
            r?;
        }
        Ok(())
    }

    /// Resets the state to its defaults, runs `f`, then runs a full forward
    /// pass and sets time to zero. The forward pass happens even when `f`
    /// fails; if the state left behind cannot be forwarded it is discarded.
    pub fn reset_context<T, E>(&mut self, f: impl FnOnce(&mut Physics) -> std::result::Result<T, E>) -> std::result::Result<T, E>
    where
        E: From<PhysicsError>,
    {
        self.data.reset(&self.model);
        self.stage = Stage::Invalid;
        let out = f(self);
        self.data.time = 0.0;
        if let Err(e) = self.forward() {
            self.data.reset(&self.model);
            self.forward()?;
            out?;
            return Err(e.into());
        }
        out
    }

    /// Resets to the default state and forwards.
    pub fn reset(&mut self) -> Result<()> {
        self.reset_context(|_| Ok::<_, PhysicsError>(()))
    }

    pub fn state(&self) -> SimState {
        SimState {
            time: self.data.time,
            qpos: self.data.qpos.clone(),
            qvel: self.data.qvel.clone(),
            ctrl: self.data.ctrl.clone(),
        }
    }

    pub fn set_state(&mut self, s: &SimState) -> Result<()> {
        check_len("qpos", self.model.nq(), s.qpos.len())?;
        check_len("qvel", self.model.nv(), s.qvel.len())?;
        check_len("ctrl", self.model.nu(), s.ctrl.len())?;
        self.data.time = s.time;
        self.data.qpos.clone_from(&s.qpos);
        self.data.qvel.clone_from(&s.qvel);
        self.data.ctrl.clone_from(&s.ctrl);
        self.forward()
    }

    pub fn set_qpos(&mut self, q: &[f64]) -> Result<()> {
        check_len("qpos", self.model.nq(), q.len())?;
        self.data_mut().qpos.copy_from_slice(q);
        Ok(())
    }

    pub fn set_qvel(&mut self, v: &[f64]) -> Result<()> {
        check_len("qvel", self.model.nv(), v.len())?;
        self.data_mut().qvel.copy_from_slice(v);
        Ok(())
    }

    pub fn set_control(&mut self, u: &[f64]) -> Result<()> {
        check_len("ctrl", self.model.nu(), u.len())?;
        self.data.ctrl.copy_from_slice(u);
        self.stage = self.stage.min(Stage::Position);
        Ok(())
    }

    /// Sets the external wrench on a body, applied at its centre of mass.
    pub fn set_body_wrench(&mut self, body: usize, wrench: [f64; 6]) -> Result<()> {
        let len = self.model.nbody();
        if body >= len {
            return Err(PhysicsError::IndexOutOfRange {
                namespace: Namespace::Body,
                index: body,
                len,
            });
        }
        self.data.xfrc_applied[body] = wrench;
        self.stage = self.stage.min(Stage::Position);
        Ok(())
    }

    /// Recolours a geom. Purely cosmetic, so derived data stays valid.
    pub fn set_geom_rgba(&mut self, geom: usize, rgba: [f64; 4]) -> Result<()> {
        let len = self.model.geoms.len();
        let g = self.model.geoms.get_mut(geom).ok_or(PhysicsError::IndexOutOfRange {
            namespace: Namespace::Geom,
            index: geom,
            len,
        })?;
        g.rgba = rgba;
        Ok(())
    }

    pub fn id2name(&self, index: usize, ns: Namespace) -> Result<&str> {
        let len = self.model.names(ns).len();
        if index >= len {
            return Err(PhysicsError::IndexOutOfRange {
                namespace: ns,
                index,
                len,
            });
        }
        // unnamed elements have an empty name
        Ok(self.model.id2name(ns, index).unwrap_or(""))
    }

    pub fn name2id(&self, name: &str, ns: Namespace) -> Result<usize> {
        self.model
            .name2id(ns, name)
            .ok_or_else(|| PhysicsError::UnknownName {
                namespace: ns,
                name: name.to_string(),
            })
    }

    /// Energy `[potential, kinetic]` of the current state.
    pub fn energy(&self) -> [f64; 2] {
        self.data.energy
    }
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(PhysicsError::Shape {
            what: what.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}
