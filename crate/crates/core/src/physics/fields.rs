use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::{Physics, PhysicsError, Result, Stage};
use crate::engine::ActuatorKind;
use crate::modeldom::{ElementRef, Namespace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    /// Computed from the state; read-only.
    Derived,
    /// Positions and velocities; writing invalidates everything.
    State,
    /// Inputs that only affect forces.
    Input,
    /// Writable model parameter.
    Model,
    /// Model parameter that is fixed after compilation.
    Fixed,
}

fn describe(ns: Namespace, field: &str) -> Option<(usize, Kind)> {
    use Kind::*;
    use Namespace as N;
    Some(match (ns, field) {
        (N::Body, "xpos" | "xipos") => (3, Derived),
        (N::Body, "xquat") => (4, Derived),
        (N::Body, "xfrc_applied") => (6, Input),
        (N::Body, "mass") => (1, Model),
        (N::Body, "pos") => (3, Model),
        (N::Body, "quat") => (4, Model),
        (N::Body, "subtree_mass") => (1, Fixed),
        (N::Geom, "xpos") => (3, Derived),
        (N::Geom, "xmat") => (9, Derived),
        (N::Geom, "size" | "pos") => (3, Model),
        (N::Geom, "rgba") => (4, Model),
        (N::Joint, "qpos" | "qvel") => (1, State),
        (N::Joint, "qacc" | "qfrc_bias" | "qfrc_passive" | "qfrc_actuator") => (1, Derived),
        (N::Joint, "xanchor" | "xaxis") => (3, Derived),
        (N::Joint, "damping" | "stiffness" | "armature" | "springref") => (1, Model),
        (N::Joint, "range") => (2, Fixed),
        (N::Actuator, "ctrl") => (1, Input),
        (N::Actuator, "force") => (1, Derived),
        (N::Actuator, "gear" | "kp") => (1, Model),
        (N::Actuator, "ctrlrange") => (2, Fixed),
        (N::Site, "xpos") => (3, Derived),
        (N::Site, "xmat") => (9, Derived),
        (N::Site, "pos") => (3, Model),
        (N::Sensor, "data") => (1, Derived),
        (N::Camera, "xpos") => (3, Derived),
        (N::Camera, "xmat") => (9, Derived),
        (N::Camera, "fovy") => (1, Model),
        (N::Light, "xpos" | "xdir") => (3, Derived),
        (N::Material, "rgba") => (4, Model),
        _ => return None,
    })
}

fn count(p: &Physics, ns: Namespace) -> usize {
    let m = &p.model;
    match ns {
        Namespace::Body => m.bodies.len(),
        Namespace::Geom => m.geoms.len(),
        Namespace::Site => m.sites.len(),
        Namespace::Joint => m.joints.len(),
        Namespace::Light => m.lights.len(),
        Namespace::Camera => m.cameras.len(),
        Namespace::Actuator => m.actuators.len(),
        Namespace::Sensor => m.sensors.len(),
        Namespace::Texture => m.textures.len(),
        Namespace::Material => m.materials.len(),
        Namespace::Default => 0,
    }
}

fn mat(m: &Matrix3<f64>) -> Vec<f64> {
    // row-major
    m.transpose().as_slice().to_vec()
}

fn quat(q: &UnitQuaternion<f64>) -> Vec<f64> {
    vec![q.w, q.i, q.j, q.k]
}

fn read(p: &Physics, ns: Namespace, field: &str, i: usize) -> Vec<f64> {
    use Namespace as N;
    let (m, d) = (&p.model, &p.data);
    match (ns, field) {
        (N::Body, "xpos") => d.xpos[i].as_slice().to_vec(),
        (N::Body, "xipos") => d.xipos[i].as_slice().to_vec(),
        (N::Body, "xquat") => quat(&d.xquat[i]),
        (N::Body, "xfrc_applied") => d.xfrc_applied[i].to_vec(),
        (N::Body, "mass") => vec![m.bodies[i].mass],
        (N::Body, "pos") => m.bodies[i].pos.as_slice().to_vec(),
        (N::Body, "quat") => quat(&m.bodies[i].quat),
        (N::Body, "subtree_mass") => vec![m.bodies[i].subtree_mass],
        (N::Geom, "xpos") => d.geom_xpos[i].as_slice().to_vec(),
        (N::Geom, "xmat") => mat(&d.geom_xmat[i]),
        (N::Geom, "size") => m.geoms[i].size.to_vec(),
        (N::Geom, "pos") => m.geoms[i].pos.as_slice().to_vec(),
        (N::Geom, "rgba") => m.geoms[i].rgba.to_vec(),
        (N::Joint, "qpos") => vec![d.qpos[i]],
        (N::Joint, "qvel") => vec![d.qvel[i]],
        (N::Joint, "qacc") => vec![d.qacc[i]],
        (N::Joint, "qfrc_bias") => vec![d.qfrc_bias[i]],
        (N::Joint, "qfrc_passive") => vec![d.qfrc_passive[i]],
        (N::Joint, "qfrc_actuator") => vec![d.qfrc_actuator[i]],
        (N::Joint, "xanchor") => d.xanchor[i].as_slice().to_vec(),
        (N::Joint, "xaxis") => d.xaxis[i].as_slice().to_vec(),
        (N::Joint, "damping") => vec![m.joints[i].damping],
        (N::Joint, "stiffness") => vec![m.joints[i].stiffness],
        (N::Joint, "armature") => vec![m.joints[i].armature],
        (N::Joint, "springref") => vec![m.joints[i].springref],
        (N::Joint, "range") => m.joints[i]
            .range
            .map_or(vec![0.0, 0.0], |r| r.to_vec()),
        (N::Actuator, "ctrl") => vec![d.ctrl[i]],
        (N::Actuator, "force") => vec![d.actuator_force[i]],
        (N::Actuator, "gear") => vec![match m.actuators[i].kind {
            ActuatorKind::Motor { gear } => gear,
            ActuatorKind::Position { .. } => 1.0,
        }],
        (N::Actuator, "kp") => vec![match m.actuators[i].kind {
            ActuatorKind::Motor { .. } => 0.0,
            ActuatorKind::Position { kp, .. } => kp,
        }],
        (N::Actuator, "ctrlrange") => m.actuators[i]
            .ctrlrange
            .map_or(vec![0.0, 0.0], |r| r.to_vec()),
        (N::Site, "xpos") => d.site_xpos[i].as_slice().to_vec(),
        (N::Site, "xmat") => mat(&d.site_xmat[i]),
        (N::Site, "pos") => m.sites[i].pos.as_slice().to_vec(),
        (N::Sensor, "data") => vec![d.sensordata[i]],
        (N::Camera, "xpos") => d.cam_xpos[i].as_slice().to_vec(),
        (N::Camera, "xmat") => mat(&d.cam_xmat[i]),
        (N::Camera, "fovy") => vec![m.cameras[i].fovy],
        (N::Light, "xpos") => d.light_xpos[i].as_slice().to_vec(),
        (N::Light, "xdir") => d.light_xdir[i].as_slice().to_vec(),
        (N::Material, "rgba") => m.materials[i].rgba.to_vec(),
        _ => unreachable!("field table and reader disagree on {ns}.{field}"),
    }
}

fn write_unchecked(p: &mut Physics, ns: Namespace, field: &str, i: usize, v: &[f64]) {
    use Namespace as N;
    let (m, d) = (&mut p.model, &mut p.data);
    let v3 = || Vector3::new(v[0], v[1], v[2]);
    match (ns, field) {
        (N::Body, "xfrc_applied") => d.xfrc_applied[i].copy_from_slice(v),
        (N::Body, "mass") => m.bodies[i].mass = v[0],
        (N::Body, "pos") => m.bodies[i].pos = v3(),
        (N::Body, "quat") => m.bodies[i].quat = crate::engine::spatial::quat_wxyz(v),
        (N::Geom, "size") => m.geoms[i].size.copy_from_slice(v),
        (N::Geom, "pos") => m.geoms[i].pos = v3(),
        (N::Geom, "rgba") => m.geoms[i].rgba.copy_from_slice(v),
        (N::Joint, "qpos") => d.qpos[i] = v[0],
        (N::Joint, "qvel") => d.qvel[i] = v[0],
        (N::Joint, "damping") => m.joints[i].damping = v[0],
        (N::Joint, "stiffness") => m.joints[i].stiffness = v[0],
        (N::Joint, "armature") => m.joints[i].armature = v[0],
        (N::Joint, "springref") => m.joints[i].springref = v[0],
        (N::Actuator, "ctrl") => d.ctrl[i] = v[0],
        (N::Actuator, "gear") => {
            if let ActuatorKind::Motor { gear } = &mut m.actuators[i].kind {
                *gear = v[0];
            }
        }
        (N::Actuator, "kp") => {
            if let ActuatorKind::Position { kp, .. } = &mut m.actuators[i].kind {
                *kp = v[0];
            }
        }
        (N::Site, "pos") => m.sites[i].pos = v3(),
        (N::Camera, "fovy") => m.cameras[i].fovy = v[0],
        (N::Material, "rgba") => m.materials[i].rgba.copy_from_slice(v),
        _ => unreachable!("field table and writer disagree on {ns}.{field}"),
    }
}

fn lookup(ns: Namespace, field: &str) -> Result<(usize, Kind)> {
    describe(ns, field).ok_or_else(|| PhysicsError::UnknownField {
        namespace: ns,
        field: field.to_string(),
    })
}

fn check_index(p: &Physics, ns: Namespace, i: usize) -> Result<()> {
    let len = count(p, ns);
    if i >= len {
        return Err(PhysicsError::IndexOutOfRange {
            namespace: ns,
            index: i,
            len,
        });
    }
    Ok(())
}

fn write(p: &mut Physics, ns: Namespace, field: &str, i: usize, v: &[f64]) -> Result<()> {
    let (width, kind) = lookup(ns, field)?;
    check_index(p, ns, i)?;
    match kind {
        Kind::Derived | Kind::Fixed => return Err(PhysicsError::ReadOnly(format!("{ns}.{field}"))),
        Kind::Input => p.stage = p.stage.min(Stage::Position),
        Kind::State | Kind::Model => p.stage = Stage::Invalid,
    }
    if v.len() != width {
        return Err(PhysicsError::Shape {
            what: format!("{ns}.{field}"),
            expected: width,
            got: v.len(),
        });
    }
    write_unchecked(p, ns, field, i, v);
    Ok(())
}

fn columns(width: usize, field: &str) -> Option<&'static [&'static str]> {
    match (width, field) {
        (3, "size") => None,
        (3, _) => Some(&["x", "y", "z"]),
        (4, "xquat" | "quat") => Some(&["w", "x", "y", "z"]),
        (4, "rgba") => Some(&["r", "g", "b", "a"]),
        (9, _) => Some(&["xx", "xy", "xz", "yx", "yy", "yz", "zx", "zy", "zz"]),
        _ => None,
    }
}

/// Arrays addressable by element name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Qpos,
    Qvel,
    Qacc,
    Ctrl,
    ActuatorForce,
    BodyXpos,
    BodyXquat,
    GeomXpos,
    GeomXmat,
    SiteXpos,
    SensorData,
    XfrcApplied,
}

impl Field {
    pub const ALL: [Field; 12] = [
        Field::Qpos,
        Field::Qvel,
        Field::Qacc,
        Field::Ctrl,
        Field::ActuatorForce,
        Field::BodyXpos,
        Field::BodyXquat,
        Field::GeomXpos,
        Field::GeomXmat,
        Field::SiteXpos,
        Field::SensorData,
        Field::XfrcApplied,
    ];

    fn target(self) -> (Namespace, &'static str) {
        use Namespace as N;
        match self {
            Field::Qpos => (N::Joint, "qpos"),
            Field::Qvel => (N::Joint, "qvel"),
            Field::Qacc => (N::Joint, "qacc"),
            Field::Ctrl => (N::Actuator, "ctrl"),
            Field::ActuatorForce => (N::Actuator, "force"),
            Field::BodyXpos => (N::Body, "xpos"),
            Field::BodyXquat => (N::Body, "xquat"),
            Field::GeomXpos => (N::Geom, "xpos"),
            Field::GeomXmat => (N::Geom, "xmat"),
            Field::SiteXpos => (N::Site, "xpos"),
            Field::SensorData => (N::Sensor, "data"),
            Field::XfrcApplied => (N::Body, "xfrc_applied"),
        }
    }

    /// Namespace supplying the row names.
    pub fn namespace(self) -> Namespace {
        self.target().0
    }

    pub fn width(self) -> usize {
        let (ns, f) = self.target();
        describe(ns, f).unwrap().0
    }

    pub fn columns(self) -> Option<&'static [&'static str]> {
        let (_, f) = self.target();
        columns(self.width(), f)
    }
}

/// Read access to one array, indexed by element name or number.
pub struct NamedView<'a> {
    physics: &'a Physics,
    field: Field,
}

/// Read/write access to one array.
pub struct NamedViewMut<'a> {
    physics: &'a mut Physics,
    field: Field,
}

fn column_index(field: Field, col: &str) -> Result<usize> {
    let cols = field.columns().unwrap_or(&[]);
    cols.iter().position(|c| *c == col).ok_or_else(|| PhysicsError::UnknownColumn {
        column: col.to_string(),
        expected: cols.to_vec(),
    })
}

impl<'a> NamedView<'a> {
    pub fn field(&self) -> Field {
        self.field
    }

    /// Row names; unnamed rows are empty strings.
    pub fn row_names(&self) -> Vec<String> {
        let ns = self.field.namespace();
        (0..count(self.physics, ns))
            .map(|i| self.physics.model.id2name(ns, i).unwrap_or("").to_string())
            .collect()
    }

    pub fn len(&self) -> usize {
        count(self.physics, self.field.namespace())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> Result<Vec<f64>> {
        let (ns, f) = self.field.target();
        check_index(self.physics, ns, i)?;
        Ok(read(self.physics, ns, f, i))
    }

    pub fn get(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.physics.name2id(name, self.field.namespace())?;
        self.row(i)
    }

    /// Single entry by row name and column label, e.g. `("green_sphere", "z")`.
    pub fn at(&self, name: &str, col: &str) -> Result<f64> {
        let c = column_index(self.field, col)?;
        Ok(self.get(name)?[c])
    }

    /// Every row concatenated.
    pub fn to_vec(&self) -> Vec<f64> {
        let (ns, f) = self.field.target();
        (0..self.len())
            .flat_map(|i| read(self.physics, ns, f, i))
            .collect()
    }
}

impl<'a> NamedViewMut<'a> {
    pub fn view(&self) -> NamedView<'_> {
        NamedView {
            physics: self.physics,
            field: self.field,
        }
    }

    pub fn set_row(&mut self, i: usize, v: &[f64]) -> Result<()> {
        let (ns, f) = self.field.target();
        write(self.physics, ns, f, i, v)
    }

    pub fn set(&mut self, name: &str, v: &[f64]) -> Result<()> {
        let i = self.physics.name2id(name, self.field.namespace())?;
        self.set_row(i, v)
    }

    pub fn set_at(&mut self, name: &str, col: &str, value: f64) -> Result<()> {
        let c = column_index(self.field, col)?;
        let mut row = self.view().get(name)?;
        row[c] = value;
        self.set(name, &row)
    }
}

impl Physics {
    pub fn named(&self, field: Field) -> NamedView<'_> {
        NamedView {
            physics: self,
            field,
        }
    }

    pub fn named_mut(&mut self, field: Field) -> NamedViewMut<'_> {
        NamedViewMut {
            physics: self,
            field,
        }
    }

    /// Resolves model elements to compiled indices for vectorized access.
    pub fn bind(&self, elements: &[ElementRef]) -> Result<Binding> {
        let mut ns = None;
        let mut indices = Vec::with_capacity(elements.len());
        for &e in elements {
            let (n, i) = self
                .model
                .element_index(e)
                .ok_or(PhysicsError::StaleElement(e))?;
            match ns {
                Some(prev) if prev != n => return Err(PhysicsError::MixedNamespaces(prev, n)),
                _ => ns = Some(n),
            }
            indices.push(i);
        }
        Ok(Binding {
            namespace: ns,
            indices,
        })
    }
}

/// A fixed list of compiled elements of one namespace.
#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    namespace: Option<Namespace>,
    indices: Vec<usize>,
}

impl Binding {
    pub fn namespace(&self) -> Option<Namespace> {
        self.namespace
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// One row per bound element.
    pub fn get(&self, physics: &Physics, field: &str) -> Result<Vec<Vec<f64>>> {
        let Some(ns) = self.namespace else {
            return Ok(Vec::new());
        };
        lookup(ns, field)?;
        Ok(self
            .indices
            .iter()
            .map(|&i| read(physics, ns, field, i))
            .collect())
    }

    /// Reads a scalar field as one value per element.
    pub fn get_scalar(&self, physics: &Physics, field: &str) -> Result<Vec<f64>> {
        Ok(self.get(physics, field)?.into_iter().flatten().collect())
    }

    /// Writes one row per bound element.
    pub fn set(&self, physics: &mut Physics, field: &str, rows: &[Vec<f64>]) -> Result<()> {
        if rows.len() != self.indices.len() {
            return Err(PhysicsError::Shape {
                what: format!("binding.{field}"),
                expected: self.indices.len(),
                got: rows.len(),
            });
        }
        let Some(ns) = self.namespace else {
            return Ok(());
        };
        for (&i, row) in self.indices.iter().zip(rows) {
            write(physics, ns, field, i, row)?;
        }
        Ok(())
    }

    /// Writes a scalar field, one value per element.
    pub fn set_scalar(&self, physics: &mut Physics, field: &str, values: &[f64]) -> Result<()> {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        self.set(physics, field, &rows)
    }
}
