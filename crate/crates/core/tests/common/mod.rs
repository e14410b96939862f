#![allow(dead_code)]

pub mod pipeline;

use ctrlforge::engine::{self, CompiledModel, Data};
use ctrlforge::modeldom::{Attrs, ModelRoot};
use nalgebra::{DMatrix, Matrix3, Quaternion, Vector3};
use rand::Rng;

pub const SWING_XML: &str = r#"
<mujoco model="swing">
  <worldbody>
    <light name="top" pos="0 0 1"/>
    <body name="box_and_sphere" euler="0 0 -30">
      <joint name="swing" type="hinge" axis="1 -1 0" pos="-.2 -.2 -.2"/>
      <geom name="red_box" type="box" size=".2 .2 .2" rgba="1 0 0 1"/>
      <geom name="green_sphere" pos=".2 .2 .2" size=".1" rgba="0 1 0 1"/>
    </body>
  </worldbody>
</mujoco>
"#;

/// Two-link planar pendulum hanging from the origin, hinge axes along y.
pub fn double_pendulum(damping: f64) -> ModelRoot {
    let xml = format!(
        r#"<mujoco model="double">
  <option integrator="RK4" timestep="0.001"/>
  <worldbody>
    <body name="upper">
      <joint name="shoulder" axis="0 1 0" damping="{damping}"/>
      <geom type="capsule" fromto="0 0 0 0 0 -0.5" size="0.04"/>
      <body name="lower" pos="0 0 -0.5">
        <joint name="elbow" axis="0 1 0" damping="{damping}"/>
        <geom type="capsule" fromto="0 0 0 0 0 -0.4" size="0.03"/>
        <geom type="sphere" pos="0 0 -0.4" size="0.06"/>
      </body>
    </body>
  </worldbody>
</mujoco>"#
    );
    ModelRoot::from_xml(&xml).unwrap()
}

/// Single hinge pendulum: point-like sphere of radius `r` at distance `l`.
pub fn pendulum_xml(l: f64, r: f64) -> String {
    format!(
        r#"<mujoco model="pendulum">
  <worldbody>
    <body name="pole">
      <joint name="hinge" axis="0 1 0"/>
      <geom name="bob" type="sphere" pos="0 0 -{l}" size="{r}"/>
    </body>
  </worldbody>
</mujoco>"#
    )
}

fn rand_vec(rng: &mut impl Rng, scale: f64) -> [f64; 3] {
    [
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    ]
}

/// Random kinematic tree with at most `max_joints` hinge/slide joints. Every
/// body carries at least one geom so the model is dynamically valid.
pub fn random_model(rng: &mut impl Rng, max_joints: usize) -> ModelRoot {
    let mut m = ModelRoot::new("random");
    let mut bodies = vec![m.worldbody()];
    let mut joints = 0;
    while joints < max_joints {
        let parent = bodies[rng.gen_range(0..bodies.len())];
        let body = m
            .add(
                parent,
                "body",
                Attrs::new()
                    .set("pos", rand_vec(rng, 0.5))
                    .set("euler", rand_vec(rng, 90.0)),
            )
            .unwrap();
        let nj = if joints + 2 <= max_joints && rng.gen_bool(0.2) { 2 } else { 1 };
        for _ in 0..nj {
            let kind = if rng.gen_bool(0.7) { "hinge" } else { "slide" };
            let mut axis = rand_vec(rng, 1.0);
            if axis.iter().map(|a| a * a).sum::<f64>() < 1e-2 {
                axis = [0.0, 0.0, 1.0];
            }
            m.add(
                body,
                "joint",
                Attrs::new()
                    .set("type", kind)
                    .set("axis", axis)
                    .set("pos", rand_vec(rng, 0.2))
                    .set("armature", rng.gen_range(0.0..0.05)),
            )
            .unwrap();
            joints += 1;
        }
        for _ in 0..rng.gen_range(1..3) {
            let attrs = match rng.gen_range(0..4) {
                0 => Attrs::new().set("type", "sphere").set("size", [rng.gen_range(0.02..0.15)]),
                1 => Attrs::new().set("type", "box").set(
                    "size",
                    [
                        rng.gen_range(0.02..0.2),
                        rng.gen_range(0.02..0.2),
                        rng.gen_range(0.02..0.2),
                    ],
                ),
                2 => Attrs::new()
                    .set("type", "capsule")
                    .set("size", [rng.gen_range(0.02..0.1), rng.gen_range(0.05..0.3)]),
                _ => Attrs::new().set("type", "ellipsoid").set(
                    "size",
                    [
                        rng.gen_range(0.02..0.2),
                        rng.gen_range(0.02..0.2),
                        rng.gen_range(0.02..0.2),
                    ],
                ),
            };
            let attrs = attrs
                .set("pos", rand_vec(rng, 0.3))
                .set("euler", rand_vec(rng, 180.0))
                .set("density", rng.gen_range(100.0..2000.0));
            m.add(body, "geom", attrs).unwrap();
        }
        bodies.push(body);
    }
    m
}

pub fn random_state(rng: &mut impl Rng, m: &CompiledModel, d: &mut Data) {
    for j in 0..m.nq() {
        d.qpos[j] = rng.gen_range(-2.0..2.0);
        d.qvel[j] = rng.gen_range(-2.0..2.0);
    }
}

/// Kinetic energy from finite differences of forward kinematics only.
fn kinetic_energy_fd(m: &CompiledModel, q: &[f64], v: &[f64]) -> f64 {
    let eps = 1e-6;
    let mut plus = Data::new(m);
    let mut minus = Data::new(m);
    let mut mid = Data::new(m);
    for j in 0..m.nq() {
        plus.qpos[j] = q[j] + eps * v[j];
        minus.qpos[j] = q[j] - eps * v[j];
        mid.qpos[j] = q[j];
    }
    engine::kinematics(m, &mut plus);
    engine::kinematics(m, &mut minus);
    engine::kinematics(m, &mut mid);
    let mut t = 0.0;
    for b in 1..m.nbody() {
        let body = &m.bodies[b];
        let vc: Vector3<f64> = (plus.xipos[b] - minus.xipos[b]) / (2.0 * eps);
        let dq: Quaternion<f64> = (plus.xquat[b].into_inner() - minus.xquat[b].into_inner()) / (2.0 * eps);
        let w = (dq * mid.xquat[b].into_inner().conjugate()).vector() * 2.0;
        let r = mid.xquat[b].to_rotation_matrix();
        let ic: Matrix3<f64> = r.matrix() * body.inertia * r.matrix().transpose();
        t += 0.5 * body.mass * vc.dot(&vc) + 0.5 * w.dot(&(ic * w));
    }
    t + 0.5
        * m.joints
            .iter()
            .zip(v)
            .map(|(j, vi)| j.armature * vi * vi)
            .sum::<f64>()
}

/// Joint-space inertia by polarization of the finite-difference kinetic energy.
pub fn oracle_mass_matrix(m: &CompiledModel, q: &[f64]) -> DMatrix<f64> {
    let n = m.nv();
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let mut out = DMatrix::zeros(n, n);
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * kinetic_energy_fd(m, q, &unit(i))).collect();
    for i in 0..n {
        out[(i, i)] = diag[i];
        for j in 0..i {
            let mut e = unit(i);
            e[j] = 1.0;
            let v = kinetic_energy_fd(m, q, &e) - 0.5 * diag[i] - 0.5 * diag[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

pub fn compiled(root: &ModelRoot) -> (CompiledModel, Data) {
    let m = engine::compile(root).unwrap();
    let mut d = Data::new(&m);
    engine::forward(&m, &mut d).unwrap();
    (m, d)
}
