//! k-link planar swimmer in a viscous medium.
//!
//! The links move in the horizontal plane on a base of two slides and a
//! yaw hinge; propulsion comes entirely from the anisotropic drag on the
//! capsules. Reward is 1 with the nose inside the target and decays like a
//! long-tail (Lorentzian) curve outside it. The target lands within 0.3 m
//! of the origin in one episode out of five and within 2 m otherwise.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{body, body_rot, body_velocity, geom, geom_pos, site, uniform, Domain, ObsFn, ASSETS};
use crate::composer::RandomState;
use crate::physics::Physics;
use crate::rlcore::{tolerance, EnvError, Sigmoid};

const LINK: f64 = 0.1;
const TARGET_RADIUS: f64 = 0.1;
const JOINT_RANGE: f64 = 100.0;

pub(crate) struct Swimmer {
    pub links: usize,
}

fn segment(i: usize) -> String {
    if i == 0 {
        "head".to_string()
    } else {
        format!("segment_{i}")
    }
}

/// Nose to target, in the head frame.
fn nose_to_target(p: &Physics) -> Vector3<f64> {
    let d = geom_pos(p, geom(p, "target")) - p.data().site_xpos[site(p, "nose")];
    body_rot(p, body(p, "head")).transpose() * d
}

impl Domain for Swimmer {
    fn xml(&self) -> String {
        let mut chain = String::new();
        for i in 1..self.links {
            chain.push_str(&format!(
                r#"<body name="{name}" pos="{LINK} 0 0">
  <joint name="joint_{i}" type="hinge" axis="0 0 1" range="-{JOINT_RANGE} {JOINT_RANGE}" limited="true"/>
  <geom name="{name}" type="capsule" fromto="0 0 0 {LINK} 0 0" size="0.01" material="self"/>
"#,
                name = segment(i)
            ));
        }
        for _ in 1..self.links {
            chain.push_str("</body>\n");
        }
        let motors: String = (1..self.links)
            .map(|i| format!(r#"<motor name="motor_{i}" joint="joint_{i}" gear="2e-3" ctrlrange="-1 1"/>"#))
            .collect::<Vec<_>>()
            .join("\n    ");
        format!(
            r#"<mujoco model="swimmer">
  <option timestep="0.002" integrator="RK4" density="3000" gravity="0 0 0"/>
  {ASSETS}
  <worldbody>
    <light name="light" pos="0 0 4"/>
    <camera name="fixed" pos="0 0 3" euler="0 0 0"/>
    <geom name="ground" type="plane" pos="0 0 -0.05" size="3 3 0.1" material="grid"/>
    <geom name="target" type="sphere" pos="1 1 0" size="{TARGET_RADIUS}" material="target"/>
    <body name="head" pos="0 0 0">
      <joint name="root_x" type="slide" axis="1 0 0"/>
      <joint name="root_y" type="slide" axis="0 1 0"/>
      <joint name="root_yaw" type="hinge" axis="0 0 1"/>
      <geom name="head" type="capsule" fromto="0 0 0 {LINK} 0 0" size="0.01" material="self"/>
      <site name="nose" pos="-0.01 0 0" size="0.005"/>
      {chain}
    </body>
  </worldbody>
  <actuator>
    {motors}
  </actuator>
</mujoco>"#
        )
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)> {
        let k = self.links;
        vec![
            ("joints", Box::new(|p: &Physics| p.data().qpos[3..].to_vec())),
            (
                "to_target",
                Box::new(|p: &Physics| {
                    let d = nose_to_target(p);
                    vec![d.x, d.y]
                }),
            ),
            (
                "body_velocities",
                Box::new(move |p: &Physics| {
                    let mut out = Vec::with_capacity(3 * k);
                    for i in 0..k {
                        let b = body(p, &segment(i));
                        let (lin, ang) = body_velocity(p, b);
                        let r = body_rot(p, b).transpose();
                        let (lin, ang) = (r * lin, r * ang);
                        out.extend([lin.x, lin.y, ang.z]);
                    }
                    out
                }),
            ),
        ]
    }

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        let mut q = vec![0.0; physics.model().nq()];
        q[2] = uniform(rng, -PI, PI);
        let lim = JOINT_RANGE.to_radians();
        for x in &mut q[3..] {
            *x = uniform(rng, -lim, lim);
        }
        physics.set_qpos(&q)?;
        let box_size = if uniform(rng, 0.0, 1.0) < 0.2 { 0.3 } else { 2.0 };
        let (x, y) = (uniform(rng, -box_size, box_size), uniform(rng, -box_size, box_size));
        let target = geom(physics, "target");
        let g = &mut physics.model_mut().geoms[target];
        g.pos.x = x;
        g.pos.y = y;
        Ok(())
    }

    fn reward(&self, physics: &Physics) -> Result<f64, EnvError> {
        let d = nose_to_target(physics).xy().norm();
        Ok(tolerance(d, (0.0, TARGET_RADIUS), 5.0 * TARGET_RADIUS, Sigmoid::LongTail, 0.1)?)
    }
}
