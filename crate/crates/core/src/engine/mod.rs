//! Rigid-body simulation for articulated trees of hinge and slide joints.
//!
//! Dynamics are computed in world coordinates: the joint-space inertia by
//! the composite rigid body algorithm and bias forces by recursive
//! Newton-Euler. Contacts are not simulated.

mod compile;
mod data;
mod forward;
mod inertia;
mod model;
pub mod spatial;
mod step;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::modeldom::{ElementRef, ModelError, DEBUG_ENV};

pub use compile::{compile, compile_flat};
pub use data::Data;
pub use forward::{actuation, applied, clamp_ctrl, crba, energy, forward, kinematics, passive, position_stage, rnea, sensors, velocity};
pub use inertia::{projected_areas, unit_mass_properties};
pub use model::*;
pub use step::{integrate, step};

#[derive(Debug)]
pub struct CompileError {
    /// Tag and identifier of the offending element.
    pub element: String,
    pub message: String,
    pub origin: Option<ElementRef>,
    /// Where the element was last modified, when tracked.
    pub provenance: Option<String>,
    /// Directory that received the provenance dump, if any.
    pub dump: Option<PathBuf>,
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)?;
        match &self.provenance {
            Some(p) => write!(f, " (last change: {p})")?,
            None if self.origin.is_some() => {
                write!(f, " (re-run with {DEBUG_ENV}=1 to see where this element was created)")?
            }
            None => {}
        }
        if let Some(dir) = &self.dump {
            write!(f, "; provenance logs written to {}", dir.display())?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("compile error at {0}")]
    Compile(Box<CompileError>),
    #[error("simulation diverged at t={time} (degree of freedom {dof})")]
    Diverged { time: f64, dof: usize },
    #[error("joint-space inertia is not positive definite at t={time}")]
    SingularMassMatrix { time: f64 },
}
