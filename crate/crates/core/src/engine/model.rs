use std::collections::HashMap;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::modeldom::{ElementRef, Namespace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeomType {
    Plane,
    Sphere,
    Capsule,
    Cylinder,
    Box,
    Ellipsoid,
}

impl GeomType {
    pub fn parse(s: &str) -> Option<GeomType> {
        Some(match s {
            "plane" => GeomType::Plane,
            "sphere" => GeomType::Sphere,
            "capsule" => GeomType::Capsule,
            "cylinder" => GeomType::Cylinder,
            "box" => GeomType::Box,
            "ellipsoid" => GeomType::Ellipsoid,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointType {
    Hinge,
    Slide,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActuatorKind {
    Motor { gear: f64 },
    Position { kp: f64, kv: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorKind {
    JointPos,
    JointVel,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub timestep: f64,
    pub gravity: Vector3<f64>,
    /// Medium density for drag; zero disables drag.
    pub density: f64,
    pub integrator: Integrator,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            timestep: 0.002,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            density: 0.0,
            integrator: Integrator::Euler,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Body {
    pub parent: usize,
    pub pos: Vector3<f64>,
    pub quat: UnitQuaternion<f64>,
    pub mass: f64,
    /// Centre of mass in the body frame.
    pub ipos: Vector3<f64>,
    /// Rotational inertia about the centre of mass, body axes.
    pub inertia: Matrix3<f64>,
    pub joints: Vec<usize>,
    /// Mass of the body and all its descendants.
    pub subtree_mass: f64,
}

#[derive(Clone, Debug)]
pub struct Joint {
    pub kind: JointType,
    pub body: usize,
    pub pos: Vector3<f64>,
    /// Unit axis in the body frame.
    pub axis: Vector3<f64>,
    pub range: Option<[f64; 2]>,
    pub damping: f64,
    pub stiffness: f64,
    pub springref: f64,
    pub armature: f64,
    /// Reference configuration, also the initial position.
    pub qpos0: f64,
}

#[derive(Clone, Debug)]
pub struct Geom {
    pub kind: GeomType,
    pub body: usize,
    pub size: [f64; 3],
    pub pos: Vector3<f64>,
    pub quat: UnitQuaternion<f64>,
    pub rgba: [f64; 4],
    pub material: Option<usize>,
    pub group: i64,
    pub drag: f64,
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct Site {
    pub body: usize,
    pub pos: Vector3<f64>,
    pub quat: UnitQuaternion<f64>,
    pub size: [f64; 3],
    pub rgba: [f64; 4],
    pub group: i64,
}

#[derive(Clone, Debug)]
pub struct Light {
    pub body: usize,
    pub pos: Vector3<f64>,
    pub dir: Vector3<f64>,
    pub diffuse: Vector3<f64>,
    pub directional: bool,
}

#[derive(Clone, Debug)]
pub struct Camera {
    pub body: usize,
    pub pos: Vector3<f64>,
    pub quat: UnitQuaternion<f64>,
    /// Vertical field of view in degrees.
    pub fovy: f64,
}

#[derive(Clone, Debug)]
pub struct Actuator {
    pub kind: ActuatorKind,
    pub joint: usize,
    pub ctrlrange: Option<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct Sensor {
    pub kind: SensorKind,
    pub joint: usize,
}

#[derive(Clone, Debug)]
pub struct Texture {
    pub checker: bool,
    pub rgb1: [f64; 3],
    pub rgb2: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct Material {
    pub rgba: [f64; 4],
    pub texture: Option<usize>,
    pub texrepeat: [f64; 2],
    pub emission: f64,
}

/// Bidirectional map between indices and identifiers of one namespace.
#[derive(Clone, Debug, Default)]
pub struct NameTable {
    names: Vec<Option<String>>,
    index: HashMap<String, usize>,
}

impl NameTable {
    pub(crate) fn push(&mut self, name: Option<String>) {
        if let Some(n) = &name {
            self.index.insert(n.clone(), self.names.len());
        }
        self.names.push(name);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).and_then(|n| n.as_deref())
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Immutable compiled description of a model. Index 0 of `bodies` is the world.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub name: String,
    pub opt: Options,
    pub bodies: Vec<Body>,
    pub joints: Vec<Joint>,
    pub geoms: Vec<Geom>,
    pub sites: Vec<Site>,
    pub lights: Vec<Light>,
    pub cameras: Vec<Camera>,
    pub actuators: Vec<Actuator>,
    pub sensors: Vec<Sensor>,
    pub textures: Vec<Texture>,
    pub materials: Vec<Material>,
    /// Previous degree of freedom on the path to the world, per joint.
    pub dof_parent: Vec<Option<usize>>,
    pub(crate) names: HashMap<Namespace, NameTable>,
    pub(crate) origins: HashMap<ElementRef, (Namespace, usize)>,
}

impl CompiledModel {
    pub fn nq(&self) -> usize {
        self.joints.len()
    }

    pub fn nv(&self) -> usize {
        self.joints.len()
    }

    pub fn nu(&self) -> usize {
        self.actuators.len()
    }

    pub fn nbody(&self) -> usize {
        self.bodies.len()
    }

    pub fn names(&self, ns: Namespace) -> &NameTable {
        static EMPTY: std::sync::OnceLock<NameTable> = std::sync::OnceLock::new();
        self.names
            .get(&ns)
            .unwrap_or_else(|| EMPTY.get_or_init(NameTable::default))
    }

    pub fn id2name(&self, ns: Namespace, id: usize) -> Option<&str> {
        self.names(ns).name(id)
    }

    pub fn name2id(&self, ns: Namespace, name: &str) -> Option<usize> {
        self.names(ns).id(name)
    }

    /// Compiled index of a model element.
    pub fn element_index(&self, el: ElementRef) -> Option<(Namespace, usize)> {
        self.origins.get(&el).copied()
    }

    pub fn qpos0(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.qpos0).collect()
    }

    /// Total mass of all bodies.
    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }
}
