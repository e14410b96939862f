//! Torque-limited pendulum swing-up.
//!
//! The pole points up at zero joint angle. The motor can hold at most a
//! sixth of the peak gravity torque, so the pole has to be pumped up.
//! Sparse reward: 1 while the pole is within 30 degrees of vertical.
//! Initial angle is uniform over the full circle.

use std::f64::consts::PI;

use super::{body, uniform, xz_zz, Domain, ObsFn, ASSETS};
use crate::composer::RandomState;
use crate::physics::Physics;
use crate::rlcore::{tolerance, EnvError, Sigmoid};

const POLE_MASS: f64 = 0.1;
const BOB_MASS: f64 = 1.0;
const LENGTH: f64 = 0.5;

pub(crate) struct Pendulum;

impl Domain for Pendulum {
    fn xml(&self) -> String {
        let peak = 9.81 * (BOB_MASS * LENGTH + POLE_MASS * LENGTH / 2.0);
        format!(
            r#"<mujoco model="pendulum">
  <option timestep="0.002" integrator="RK4"/>
  {ASSETS}
  <worldbody>
    <light name="light" pos="0 0 2"/>
    <geom name="floor" type="plane" pos="0 0 -0.6" size="2 2 0.2" material="grid"/>
    <camera name="fixed" pos="0 -1.5 0" euler="90 0 0"/>
    <body name="pole" pos="0 0 0">
      <joint name="hinge" type="hinge" axis="0 1 0" damping="0.1"/>
      <geom name="base" type="cylinder" fromto="0 -0.03 0 0 0.03 0" size="0.021" mass="0" material="decoration"/>
      <geom name="pole" type="capsule" fromto="0 0 0 0 0 {LENGTH}" size="0.02" mass="{POLE_MASS}" material="self"/>
      <geom name="bob" type="sphere" pos="0 0 {LENGTH}" size="0.05" mass="{BOB_MASS}" material="effector"/>
    </body>
  </worldbody>
  <actuator>
    <motor name="torque" joint="hinge" gear="{gear}" ctrlrange="-1 1"/>
  </actuator>
</mujoco>"#,
            gear = peak / 6.0
        )
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)> {
        vec![
            (
                "orientation",
                Box::new(|p: &Physics| {
                    let (xz, zz) = xz_zz(p, body(p, "pole"));
                    vec![xz, zz]
                }),
            ),
            ("velocity", Box::new(|p: &Physics| p.data().qvel.clone())),
        ]
    }

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        physics.set_qpos(&[uniform(rng, -PI, PI)])?;
        Ok(())
    }

    fn reward(&self, physics: &Physics) -> Result<f64, EnvError> {
        let (_, zz) = xz_zz(physics, body(physics, "pole"));
        Ok(tolerance(zz, ((30f64).to_radians().cos(), 1.0), 0.0, Sigmoid::Gaussian, 0.1)?)
    }
}
