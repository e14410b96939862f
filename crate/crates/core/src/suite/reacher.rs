//! Planar two-link arm reaching for a randomly placed target.
//!
//! Reward is 1 while the fingertip sphere overlaps the target sphere and 0
//! otherwise; `easy` and `hard` differ only in the target radius. Joint
//! angles start uniform and the target is placed uniformly in angle at a
//! radius between 0.05 and 0.20 m, always within the arm's reach of 0.22 m.

use std::f64::consts::PI;

use super::{geom, geom_pos, uniform, Domain, ObsFn, ASSETS};
use crate::composer::RandomState;
use crate::physics::Physics;
use crate::rlcore::{tolerance, EnvError, Sigmoid};

const FINGER_RADIUS: f64 = 0.01;

pub(crate) struct Reacher {
    pub target_size: f64,
}

fn finger_to_target(p: &Physics) -> nalgebra::Vector2<f64> {
    (geom_pos(p, geom(p, "target")) - geom_pos(p, geom(p, "finger"))).xy()
}

impl Domain for Reacher {
    fn xml(&self) -> String {
        format!(
            r#"<mujoco model="reacher">
  <option timestep="0.002" integrator="RK4" gravity="0 0 0"/>
  {ASSETS}
  <worldbody>
    <light name="light" pos="0 0 1"/>
    <camera name="fixed" pos="0 0 0.75" euler="0 0 0"/>
    <geom name="ground" type="plane" pos="0 0 -0.01" size="0.3 0.3 0.1" material="grid"/>
    <geom name="root" type="cylinder" fromto="0 0 0 0 0 0.02" size="0.011" material="decoration"/>
    <body name="arm" pos="0 0 0.01">
      <joint name="shoulder" type="hinge" axis="0 0 1" damping="0.01" armature="1e-5"/>
      <geom name="arm" type="capsule" fromto="0 0 0 0.12 0 0" size="0.01" material="self"/>
      <body name="hand" pos="0.12 0 0">
        <joint name="wrist" type="hinge" axis="0 0 1" damping="0.01" armature="1e-5"/>
        <geom name="hand" type="capsule" fromto="0 0 0 0.1 0 0" size="0.01" material="self"/>
        <geom name="finger" type="sphere" pos="0.1 0 0" size="{FINGER_RADIUS}" mass="0.002" material="effector"/>
      </body>
    </body>
    <geom name="target" type="sphere" pos="0.1 0.1 0.01" size="{}" material="target"/>
  </worldbody>
  <actuator>
    <motor name="shoulder" joint="shoulder" gear="0.05" ctrlrange="-1 1"/>
    <motor name="wrist" joint="wrist" gear="0.05" ctrlrange="-1 1"/>
  </actuator>
</mujoco>"#,
            self.target_size
        )
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)> {
        vec![
            ("position", Box::new(|p: &Physics| p.data().qpos.clone())),
            (
                "to_target",
                Box::new(|p: &Physics| {
                    let d = finger_to_target(p);
                    vec![d.x, d.y]
                }),
            ),
            ("velocity", Box::new(|p: &Physics| p.data().qvel.clone())),
        ]
    }

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        physics.set_qpos(&[uniform(rng, -PI, PI), uniform(rng, -PI, PI)])?;
        let angle = uniform(rng, 0.0, 2.0 * PI);
        let radius = uniform(rng, 0.05, 0.20);
        let target = geom(physics, "target");
        let g = &mut physics.model_mut().geoms[target];
        g.pos.x = radius * angle.cos();
        g.pos.y = radius * angle.sin();
        Ok(())
    }

    fn reward(&self, physics: &Physics) -> Result<f64, EnvError> {
        let radii = self.target_size + FINGER_RADIUS;
        Ok(tolerance(finger_to_target(physics).norm(), (0.0, radii), 0.0, Sigmoid::Gaussian, 0.1)?)
    }
}
