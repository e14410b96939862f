//! Underactuated double pendulum with torque at the elbow only.
//!
//! The tip has to reach a target 2 m above the shoulder, i.e. both links
//! upright. The smooth variant uses a long-tail tolerance with unit margin,
//! the sparse one an indicator on the 0.2 m target sphere. Both joint
//! angles start uniform over the full circle.

use std::f64::consts::PI;

use super::{body, site, uniform, xz_zz, Domain, ObsFn, ASSETS};
use crate::composer::RandomState;
use crate::physics::Physics;
use crate::rlcore::{tolerance, EnvError, Sigmoid};

const TARGET_RADIUS: f64 = 0.2;

pub(crate) struct Acrobot {
    pub sparse: bool,
}

fn tip_to_target(p: &Physics) -> f64 {
    let tip = p.data().site_xpos[site(p, "tip")];
    (tip - nalgebra::Vector3::new(0.0, 0.0, 2.0)).norm()
}

impl Domain for Acrobot {
    fn xml(&self) -> String {
        format!(
            r#"<mujoco model="acrobot">
  <option timestep="0.002" integrator="RK4"/>
  {ASSETS}
  <worldbody>
    <light name="light" pos="0 0 4"/>
    <geom name="floor" type="plane" pos="0 0 -2.2" size="3 3 0.2" material="grid"/>
    <camera name="fixed" pos="0 -6 0.2" euler="90 0 0"/>
    <geom name="target" type="sphere" pos="0 0 2" size="{TARGET_RADIUS}" material="target"/>
    <body name="upper_arm" pos="0 0 0">
      <joint name="shoulder" type="hinge" axis="0 1 0" damping="0.05"/>
      <geom name="upper_arm" type="capsule" fromto="0 0 0 0 0 1" size="0.049" mass="1" material="self"/>
      <body name="lower_arm" pos="0 0 1">
        <joint name="elbow" type="hinge" axis="0 1 0" damping="0.05"/>
        <geom name="lower_arm" type="capsule" fromto="0 0 0 0 0 1" size="0.049" mass="1" material="self"/>
        <site name="tip" pos="0 0 1" size="0.01"/>
      </body>
    </body>
  </worldbody>
  <actuator>
    <motor name="elbow" joint="elbow" gear="2" ctrlrange="-1 1"/>
  </actuator>
</mujoco>"#
        )
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)> {
        vec![
            (
                "orientations",
                Box::new(|p: &Physics| {
                    let (a, b) = (xz_zz(p, body(p, "upper_arm")), xz_zz(p, body(p, "lower_arm")));
                    vec![a.0, b.0, a.1, b.1]
                }),
            ),
            ("velocity", Box::new(|p: &Physics| p.data().qvel.clone())),
        ]
    }

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        let q = [uniform(rng, -PI, PI), uniform(rng, -PI, PI)];
        physics.set_qpos(&q)?;
        Ok(())
    }

    fn reward(&self, physics: &Physics) -> Result<f64, EnvError> {
        let margin = if self.sparse { 0.0 } else { 1.0 };
        Ok(tolerance(
            tip_to_target(physics),
            (0.0, TARGET_RADIUS),
            margin,
            Sigmoid::LongTail,
            0.1,
        )?)
    }
}
