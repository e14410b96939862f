use std::collections::HashMap;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::inertia::unit_mass_properties;
use super::model::*;
use super::spatial::{euler_xyz, quat_wxyz, z_to};
use super::{CompileError, EngineError};
use crate::modeldom::{self, AttrValue, FlatElement, ModelRoot, Namespace};

const DEFAULT_DENSITY: f64 = 1000.0;
const DEFAULT_RGBA: [f64; 4] = [0.5, 0.5, 0.5, 1.0];

/// Compiles a model tree. Errors carry the provenance of the offending
/// element when the model was built with debug tracking.
pub fn compile(root: &ModelRoot) -> Result<CompiledModel, EngineError> {
    let flat = root.flatten()?;
    compile_flat(&flat).map_err(|err| match err {
        EngineError::Compile(mut e) => {
            if let Some(origin) = e.origin {
                e.provenance = root.provenance(origin).ok().map(|p| p.to_string());
            }
            if root.debug() {
                if let Some(dir) = modeldom::dump_dir() {
                    e.dump = root.dump_provenance(&dir).ok().map(|_| dir);
                }
            }
            EngineError::Compile(e)
        }
        other => other,
    })
}

/// Compiles an already flattened document.
pub fn compile_flat(flat: &FlatElement) -> Result<CompiledModel, EngineError> {
    Compiler::new(flat)?.run(flat)
}

fn fail(e: &FlatElement, message: impl Into<String>) -> EngineError {
    let name = e
        .str_attr("name")
        .map(|n| format!(" '{n}'"))
        .unwrap_or_default();
    EngineError::Compile(Box::new(CompileError {
        element: format!("<{}>{name}", e.tag),
        message: message.into(),
        origin: e.origin,
        provenance: None,
        dump: None,
    }))
}

struct Classes<'a> {
    map: HashMap<String, (Option<String>, &'a FlatElement)>,
}

impl<'a> Classes<'a> {
    fn collect(&mut self, e: &'a FlatElement, parent: Option<String>) {
        let name = match &parent {
            None => "main".to_string(),
            Some(_) => e.str_attr("class").unwrap_or("main").to_string(),
        };
        self.map.insert(name.clone(), (parent, e));
        for c in e.children.iter().filter(|c| c.tag == "default") {
            self.collect(c, Some(name.clone()));
        }
    }

    fn lookup(&self, class: &str, tag: &str, attr: &str) -> Option<&'a AttrValue> {
        let mut cur = Some(class.to_string());
        while let Some(c) = cur {
            let (parent, node) = self.map.get(&c)?;
            if let Some(v) = node
                .children
                .iter()
                .find(|t| t.tag == tag)
                .and_then(|t| t.attr(attr))
            {
                return Some(v);
            }
            cur = parent.clone();
        }
        None
    }
}

/// Element view with default-class resolution.
struct El<'a, 'c> {
    e: &'a FlatElement,
    class: String,
    classes: &'c Classes<'a>,
}

impl<'a> El<'a, '_> {
    fn get(&self, attr: &str) -> Option<&'a AttrValue> {
        self.e
            .attr(attr)
            .or_else(|| self.classes.lookup(&self.class, self.e.tag, attr))
    }

    fn num(&self, attr: &str, default: f64) -> f64 {
        self.get(attr).and_then(AttrValue::as_f64).unwrap_or(default)
    }

    fn int(&self, attr: &str, default: i64) -> i64 {
        match self.get(attr) {
            Some(AttrValue::Int(i)) => *i,
            _ => default,
        }
    }

    fn arr<const N: usize>(&self, attr: &str, default: [f64; N]) -> [f64; N] {
        match self.get(attr).and_then(AttrValue::as_array) {
            Some(v) if v.len() == N => {
                let mut out = [0.0; N];
                out.copy_from_slice(&v);
                out
            }
            _ => default,
        }
    }

    fn vec3(&self, attr: &str, default: [f64; 3]) -> Vector3<f64> {
        Vector3::from(self.arr(attr, default))
    }

    fn str(&self, attr: &str) -> Option<&'a str> {
        self.get(attr).and_then(AttrValue::as_str)
    }

    fn bool(&self, attr: &str) -> Option<bool> {
        self.get(attr).and_then(AttrValue::as_bool)
    }
}

struct Compiler<'a> {
    classes: Classes<'a>,
    angle: f64,
    model: CompiledModel,
}

impl<'a> Compiler<'a> {
    fn new(flat: &'a FlatElement) -> Result<Compiler<'a>, EngineError> {
        if flat.tag != "mujoco" {
            return Err(fail(flat, "root element must be <mujoco>"));
        }
        let mut classes = Classes { map: HashMap::new() };
        if let Some(d) = flat.child("default") {
            classes.collect(d, None);
        }
        let radian = flat
            .child("compiler")
            .and_then(|c| c.str_attr("angle"))
            == Some("radian");
        let mut names = HashMap::new();
        for ns in Namespace::ALL {
            names.insert(ns, NameTable::default());
        }
        Ok(Compiler {
            classes,
            angle: if radian { 1.0 } else { std::f64::consts::PI / 180.0 },
            model: CompiledModel {
                name: flat.str_attr("model").unwrap_or("model").to_string(),
                opt: Options::default(),
                bodies: Vec::new(),
                joints: Vec::new(),
                geoms: Vec::new(),
                sites: Vec::new(),
                lights: Vec::new(),
                cameras: Vec::new(),
                actuators: Vec::new(),
                sensors: Vec::new(),
                textures: Vec::new(),
                materials: Vec::new(),
                dof_parent: Vec::new(),
                names,
                origins: HashMap::new(),
            },
        })
    }

    fn el<'c>(&'c self, e: &'a FlatElement, childclass: &str) -> El<'a, 'c> {
        El {
            e,
            class: e.str_attr("class").unwrap_or(childclass).to_string(),
            classes: &self.classes,
        }
    }

    fn register(&mut self, ns: Namespace, e: &FlatElement, index: usize) {
        self.model
            .names
            .get_mut(&ns)
            .unwrap()
            .push(e.str_attr("name").map(str::to_string));
        if let Some(origin) = e.origin {
            self.model.origins.insert(origin, (ns, index));
        }
    }

    fn run(mut self, flat: &'a FlatElement) -> Result<CompiledModel, EngineError> {
        if let Some(opt) = flat.child("option") {
            let o = &mut self.model.opt;
            if let Some(v) = opt.attr("timestep").and_then(AttrValue::as_f64) {
                if v <= 0.0 {
                    return Err(fail(opt, "timestep must be positive"));
                }
                o.timestep = v;
            }
            if let Some(v) = opt.attr("gravity").and_then(AttrValue::as_array) {
                o.gravity = Vector3::new(v[0], v[1], v[2]);
            }
            if let Some(v) = opt.attr("density").and_then(AttrValue::as_f64) {
                o.density = v;
            }
            if opt.str_attr("integrator") == Some("RK4") {
                o.integrator = Integrator::Rk4;
            }
        }
        if let Some(asset) = flat.child("asset") {
            for e in asset.children.iter().filter(|c| c.tag == "texture") {
                self.texture(e);
            }
            for e in asset.children.iter().filter(|c| c.tag == "material") {
                self.material(e)?;
            }
        }
        self.model.bodies.push(Body {
            parent: 0,
            pos: Vector3::zeros(),
            quat: UnitQuaternion::identity(),
            mass: 0.0,
            ipos: Vector3::zeros(),
            inertia: Matrix3::zeros(),
            joints: Vec::new(),
            subtree_mass: 0.0,
        });
        self.model
            .names
            .get_mut(&Namespace::Body)
            .unwrap()
            .push(Some("world".into()));
        if let Some(world) = flat.child("worldbody") {
            if let Some(o) = world.origin {
                self.model.origins.insert(o, (Namespace::Body, 0));
            }
            self.body_contents(world, 0, "main")?;
        }
        if let Some(act) = flat.child("actuator") {
            for e in &act.children {
                self.actuator(e)?;
            }
        }
        if let Some(sensor) = flat.child("sensor") {
            for e in &sensor.children {
                let joint = self.joint_ref(e)?;
                let kind = if e.tag == "jointpos" {
                    SensorKind::JointPos
                } else {
                    SensorKind::JointVel
                };
                let index = self.model.sensors.len();
                self.model.sensors.push(Sensor { kind, joint });
                self.register(Namespace::Sensor, e, index);
            }
        }
        self.finish_masses();
        Ok(self.model)
    }

    fn texture(&mut self, e: &FlatElement) {
        let el = self.el(e, "main");
        let builtin = el.str("builtin").unwrap_or("none");
        let index = self.model.textures.len();
        self.model.textures.push(Texture {
            checker: builtin == "checker",
            rgb1: el.arr("rgb1", [0.8, 0.8, 0.8]),
            rgb2: el.arr("rgb2", [0.5, 0.5, 0.5]),
        });
        self.register(Namespace::Texture, e, index);
    }

    fn material(&mut self, e: &'a FlatElement) -> Result<(), EngineError> {
        let el = self.el(e, "main");
        let texture = match el.str("texture") {
            Some(t) => Some(
                self.model
                    .name2id(Namespace::Texture, t)
                    .ok_or_else(|| fail(e, format!("unknown texture '{t}'")))?,
            ),
            None => None,
        };
        let material = Material {
            rgba: el.arr("rgba", [1.0; 4]),
            texture,
            texrepeat: el.arr("texrepeat", [1.0, 1.0]),
            emission: el.num("emission", 0.0),
        };
        let index = self.model.materials.len();
        self.model.materials.push(material);
        self.register(Namespace::Material, e, index);
        Ok(())
    }

    fn orientation(&self, e: &FlatElement) -> Result<UnitQuaternion<f64>, EngineError> {
        match (e.attr("quat"), e.attr("euler")) {
            (Some(_), Some(_)) => Err(fail(e, "both quat and euler are given")),
            (Some(q), None) => {
                let q = q.as_array().unwrap();
                if q.iter().all(|x| *x == 0.0) {
                    return Err(fail(e, "quaternion is zero"));
                }
                Ok(quat_wxyz(&q))
            }
            (None, Some(v)) => {
                let v: Vec<f64> = v.as_array().unwrap().iter().map(|x| x * self.angle).collect();
                Ok(euler_xyz(&v))
            }
            (None, None) => Ok(UnitQuaternion::identity()),
        }
    }

    fn body_contents(&mut self, e: &'a FlatElement, body: usize, childclass: &str) -> Result<(), EngineError> {
        for c in &e.children {
            match c.tag {
                "joint" => self.joint(c, body, childclass)?,
                "freejoint" => return Err(fail(c, "free joints are not supported")),
                _ => {}
            }
        }
        for c in &e.children {
            match c.tag {
                "geom" => self.geom(c, body, childclass)?,
                "site" => self.site(c, body, childclass)?,
                "light" => self.light(c, body)?,
                "camera" => self.camera(c, body)?,
                _ => {}
            }
        }
        for c in e.children.iter().filter(|c| c.tag == "body") {
            let index = self.model.bodies.len();
            let quat = self.orientation(c)?;
            self.model.bodies.push(Body {
                parent: body,
                pos: Vector3::from(match c.attr("pos").and_then(AttrValue::as_array) {
                    Some(p) => [p[0], p[1], p[2]],
                    None => [0.0; 3],
                }),
                quat,
                mass: 0.0,
                ipos: Vector3::zeros(),
                inertia: Matrix3::zeros(),
                joints: Vec::new(),
                subtree_mass: 0.0,
            });
            self.register(Namespace::Body, c, index);
            let cc = c.str_attr("childclass").unwrap_or(childclass).to_string();
            self.body_contents(c, index, &cc)?;
            let subtree: f64 = self.model.geoms.iter().filter(|g| g.body >= index).map(|g| g.mass).sum();
            if !self.model.bodies[index].joints.is_empty() && subtree <= 0.0 {
                return Err(fail(c, "body with joints has no mass"));
            }
        }
        Ok(())
    }

    fn joint(&mut self, e: &'a FlatElement, body: usize, childclass: &str) -> Result<(), EngineError> {
        if body == 0 {
            return Err(fail(e, "joints cannot be attached to the world body"));
        }
        let el = self.el(e, childclass);
        let kind = match el.str("type").unwrap_or("hinge") {
            "slide" => JointType::Slide,
            _ => JointType::Hinge,
        };
        let axis = el.vec3("axis", [0.0, 0.0, 1.0]);
        if axis.norm() < 1e-12 {
            return Err(fail(e, "joint axis has zero length"));
        }
        let scale = if kind == JointType::Hinge { self.angle } else { 1.0 };
        let range = el.get("range").and_then(AttrValue::as_array);
        let limited = el.bool("limited").unwrap_or(range.is_some());
        let range = match (limited, range) {
            (true, Some(r)) => {
                if r[0] > r[1] {
                    return Err(fail(e, "joint range lower bound exceeds upper bound"));
                }
                Some([r[0] * scale, r[1] * scale])
            }
            (true, None) => return Err(fail(e, "limited joint without range")),
            _ => None,
        };
        let joint = Joint {
            kind,
            body,
            pos: el.vec3("pos", [0.0; 3]),
            axis: axis.normalize(),
            range,
            damping: el.num("damping", 0.0),
            stiffness: el.num("stiffness", 0.0),
            springref: el.num("springref", 0.0) * scale,
            armature: el.num("armature", 0.0),
            qpos0: el.num("ref", 0.0) * scale,
        };
        for (what, v) in [("damping", joint.damping), ("stiffness", joint.stiffness), ("armature", joint.armature)] {
            if v < 0.0 {
                return Err(fail(e, format!("{what} must be non-negative")));
            }
        }
        let index = self.model.joints.len();
        self.model.joints.push(joint);
        self.model.bodies[body].joints.push(index);
        self.register(Namespace::Joint, e, index);
        Ok(())
    }

    fn geom(&mut self, e: &'a FlatElement, body: usize, childclass: &str) -> Result<(), EngineError> {
        let el = self.el(e, childclass);
        let type_name = el.str("type").unwrap_or("sphere");
        let kind = GeomType::parse(type_name).ok_or_else(|| fail(e, format!("unknown geom type '{type_name}'")))?;
        let given = el.get("size").and_then(AttrValue::as_array).unwrap_or_default();
        let mut size = [0.0; 3];
        for (i, v) in given.iter().enumerate() {
            size[i] = *v;
        }
        let mut pos = el.vec3("pos", [0.0; 3]);
        let mut quat = self.orientation(e)?;
        if let Some(ft) = el.get("fromto").and_then(AttrValue::as_array) {
            let a = Vector3::new(ft[0], ft[1], ft[2]);
            let b = Vector3::new(ft[3], ft[4], ft[5]);
            let d = b - a;
            if d.norm() < 1e-12 {
                return Err(fail(e, "fromto endpoints coincide"));
            }
            if e.attr("pos").is_some() || e.attr("quat").is_some() || e.attr("euler").is_some() {
                return Err(fail(e, "fromto cannot be combined with pos or orientation"));
            }
            pos = (a + b) / 2.0;
            quat = z_to(&d.normalize());
            match kind {
                GeomType::Capsule | GeomType::Cylinder => size[1] = d.norm() / 2.0,
                GeomType::Box | GeomType::Ellipsoid => {
                    if given.len() < 2 {
                        size[1] = size[0];
                    }
                    size[2] = d.norm() / 2.0;
                }
                _ => return Err(fail(e, "fromto requires a capsule, cylinder, box or ellipsoid")),
            }
        } else {
            let needed = match kind {
                GeomType::Plane => 0,
                GeomType::Sphere => 1,
                GeomType::Capsule | GeomType::Cylinder => 2,
                GeomType::Box | GeomType::Ellipsoid => 3,
            };
            if given.len() < needed {
                return Err(fail(e, format!("{type_name} needs {needed} size values, got {}", given.len())));
            }
        }
        let checked = match kind {
            GeomType::Plane => 0,
            GeomType::Sphere => 1,
            GeomType::Capsule | GeomType::Cylinder => 2,
            GeomType::Box | GeomType::Ellipsoid => 3,
        };
        if size[..checked].iter().any(|s| *s <= 0.0) {
            return Err(fail(e, "geom size must be positive"));
        }
        if kind == GeomType::Plane {
            for s in size.iter_mut().take(2) {
                if *s <= 0.0 {
                    *s = 1.0;
                }
            }
        }
        let material = match el.str("material") {
            Some(m) => Some(
                self.model
                    .name2id(Namespace::Material, m)
                    .ok_or_else(|| fail(e, format!("unknown material '{m}'")))?,
            ),
            None => None,
        };
        let rgba = match el.get("rgba").and_then(AttrValue::as_array) {
            Some(c) => [c[0], c[1], c[2], c[3]],
            None => material.map(|m| self.model.materials[m].rgba).unwrap_or(DEFAULT_RGBA),
        };
        let (volume, _) = unit_mass_properties(kind, &size);
        let mass = match el.get("mass").and_then(AttrValue::as_f64) {
            Some(m) if m < 0.0 => return Err(fail(e, "mass must be non-negative")),
            Some(m) => m,
            None => {
                let density = el.num("density", DEFAULT_DENSITY);
                if density < 0.0 {
                    return Err(fail(e, "density must be non-negative"));
                }
                density * volume
            }
        };
        let geom = Geom {
            kind,
            body,
            size,
            pos,
            quat,
            rgba,
            material,
            group: el.int("group", 0),
            drag: el.num("drag", 1.0),
            mass: if kind == GeomType::Plane { 0.0 } else { mass },
        };
        let index = self.model.geoms.len();
        self.model.geoms.push(geom);
        self.register(Namespace::Geom, e, index);
        Ok(())
    }

    fn site(&mut self, e: &'a FlatElement, body: usize, childclass: &str) -> Result<(), EngineError> {
        let el = self.el(e, childclass);
        let quat = self.orientation(e)?;
        let given = el.get("size").and_then(AttrValue::as_array).unwrap_or_else(|| vec![0.005]);
        let mut size = [given[0]; 3];
        for (i, v) in given.iter().enumerate() {
            size[i] = *v;
        }
        let site = Site {
            body,
            pos: el.vec3("pos", [0.0; 3]),
            quat,
            size,
            rgba: el.arr("rgba", [0.5, 0.5, 0.5, 1.0]),
            group: el.int("group", 0),
        };
        let index = self.model.sites.len();
        self.model.sites.push(site);
        self.register(Namespace::Site, e, index);
        Ok(())
    }

    fn light(&mut self, e: &'a FlatElement, body: usize) -> Result<(), EngineError> {
        let el = self.el(e, "main");
        let dir = el.vec3("dir", [0.0, 0.0, -1.0]);
        if dir.norm() < 1e-12 {
            return Err(fail(e, "light direction has zero length"));
        }
        let light = Light {
            body,
            pos: el.vec3("pos", [0.0; 3]),
            dir: dir.normalize(),
            diffuse: el.vec3("diffuse", [0.7, 0.7, 0.7]),
            directional: el.bool("directional").unwrap_or(false),
        };
        let index = self.model.lights.len();
        self.model.lights.push(light);
        self.register(Namespace::Light, e, index);
        Ok(())
    }

    fn camera(&mut self, e: &'a FlatElement, body: usize) -> Result<(), EngineError> {
        let el = self.el(e, "main");
        let camera = Camera {
            body,
            pos: el.vec3("pos", [0.0; 3]),
            quat: self.orientation(e)?,
            fovy: el.num("fovy", 45.0),
        };
        let index = self.model.cameras.len();
        self.model.cameras.push(camera);
        self.register(Namespace::Camera, e, index);
        Ok(())
    }

    fn joint_ref(&self, e: &FlatElement) -> Result<usize, EngineError> {
        let name = e
            .str_attr("joint")
            .ok_or_else(|| fail(e, "missing joint reference"))?;
        self.model
            .name2id(Namespace::Joint, name)
            .ok_or_else(|| fail(e, format!("unknown joint '{name}'")))
    }

    fn actuator(&mut self, e: &'a FlatElement) -> Result<(), EngineError> {
        let el = self.el(e, "main");
        let joint = self.joint_ref(e)?;
        let kind = match e.tag {
            "motor" => ActuatorKind::Motor { gear: el.num("gear", 1.0) },
            _ => ActuatorKind::Position {
                kp: el.num("kp", 1.0),
                kv: el.num("kv", 0.0),
            },
        };
        let range = el.get("ctrlrange").and_then(AttrValue::as_array);
        let limited = el.bool("ctrllimited").unwrap_or(range.is_some());
        let ctrlrange = match (limited, range) {
            (true, Some(r)) if r[0] > r[1] => return Err(fail(e, "ctrlrange lower bound exceeds upper bound")),
            (true, Some(r)) => Some([r[0], r[1]]),
            (true, None) => return Err(fail(e, "ctrllimited actuator without ctrlrange")),
            _ => None,
        };
        let index = self.model.actuators.len();
        self.model.actuators.push(Actuator { kind, joint, ctrlrange });
        self.register(Namespace::Actuator, e, index);
        Ok(())
    }

    /// Accumulates geom mass properties into bodies.
    fn finish_masses(&mut self) {
        let m = &mut self.model;
        let nb = m.bodies.len();
        let mut mass = vec![0.0; nb];
        let mut first = vec![Vector3::zeros(); nb];
        for g in &m.geoms {
            mass[g.body] += g.mass;
            first[g.body] += g.mass * g.pos;
        }
        for b in 0..nb {
            let com = if mass[b] > 0.0 { first[b] / mass[b] } else { Vector3::zeros() };
            let mut inertia = Matrix3::zeros();
            for g in m.geoms.iter().filter(|g| g.body == b) {
                let (volume, unit) = unit_mass_properties(g.kind, &g.size);
                if volume <= 0.0 || g.mass <= 0.0 {
                    continue;
                }
                let scale = g.mass / volume;
                let r = g.quat.to_rotation_matrix();
                let local = Matrix3::from_diagonal(&(unit * scale));
                let d = g.pos - com;
                inertia += r.matrix() * local * r.matrix().transpose()
                    + g.mass * (Matrix3::identity() * d.dot(&d) - d * d.transpose());
            }
            m.bodies[b].mass = mass[b];
            m.bodies[b].ipos = com;
            m.bodies[b].inertia = inertia;
        }
        let mut last_dof: Vec<Option<usize>> = vec![None; nb];
        m.dof_parent = vec![None; m.joints.len()];
        for b in 1..nb {
            let mut prev = last_dof[m.bodies[b].parent];
            for &j in &m.bodies[b].joints {
                m.dof_parent[j] = prev;
                prev = Some(j);
            }
            last_dof[b] = prev;
        }
        for b in (1..nb).rev() {
            m.bodies[b].subtree_mass += m.bodies[b].mass;
            let (p, s) = (m.bodies[b].parent, m.bodies[b].subtree_mass);
            if p != 0 {
                m.bodies[p].subtree_mass += s;
            }
        }
    }
}
