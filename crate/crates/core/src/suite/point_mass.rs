//! A damped point mass on a plane, driven towards the origin.
//!
//! In `easy` the two actuators push along the world x and y axes. In `hard`
//! the action goes through a random 2x2 gain matrix with unit rows, drawn
//! afresh every episode. The start position is uniform in the arena square.

use super::{geom, geom_pos, std_normal, uniform, Domain, ObsFn, ASSETS};
use crate::composer::RandomState;
use crate::physics::Physics;
use crate::rlcore::{EnvError, Sigmoid, Tolerance};

const TARGET_RADIUS: f64 = 0.015;

pub(crate) struct PointMass {
    randomize_gains: bool,
    gains: [[f64; 2]; 2],
}

impl PointMass {
    pub fn new(randomize_gains: bool) -> PointMass {
        PointMass {
            randomize_gains,
            gains: [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}

impl Domain for PointMass {
    fn xml(&self) -> String {
        format!(
            r#"<mujoco model="point_mass">
  <option timestep="0.002" integrator="RK4"/>
  {ASSETS}
  <worldbody>
    <light name="light" pos="0 0 1"/>
    <camera name="fixed" pos="0 0 0.75" euler="0 0 0"/>
    <geom name="ground" type="plane" pos="0 0 -0.01" size="0.3 0.3 0.1" material="grid"/>
    <geom name="target" type="sphere" pos="0 0 0" size="{TARGET_RADIUS}" material="target"/>
    <body name="pointmass" pos="0 0 0.01">
      <joint name="root_x" type="slide" axis="1 0 0" damping="1"/>
      <joint name="root_y" type="slide" axis="0 1 0" damping="1"/>
      <geom name="pointmass" type="sphere" size="0.01" mass="0.3" material="self"/>
    </body>
  </worldbody>
  <actuator>
    <motor name="t1" joint="root_x" gear="1" ctrlrange="-1 1"/>
    <motor name="t2" joint="root_y" gear="1" ctrlrange="-1 1"/>
  </actuator>
</mujoco>"#
        )
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)> {
        vec![
            ("position", Box::new(|p: &Physics| p.data().qpos.clone())),
            ("velocity", Box::new(|p: &Physics| p.data().qvel.clone())),
        ]
    }

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        if self.randomize_gains {
            for row in &mut self.gains {
                let (a, b) = (std_normal(rng), std_normal(rng));
                let norm = a.hypot(b).max(1e-12);
                *row = [a / norm, b / norm];
            }
        }
        physics.set_qpos(&[uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)])?;
        Ok(())
    }

    fn before_step(&mut self, physics: &mut Physics, action: &[f64]) -> Result<(), EnvError> {
        let g = &self.gains;
        let u = [
            g[0][0] * action[0] + g[0][1] * action[1],
            g[1][0] * action[0] + g[1][1] * action[1],
        ];
        physics.set_control(&u)?;
        Ok(())
    }

    fn reward(&self, physics: &Physics) -> Result<f64, EnvError> {
        let mass = geom_pos(physics, geom(physics, "pointmass"));
        let target = geom_pos(physics, geom(physics, "target"));
        let dist = (mass - target).xy().norm();
        let near = Tolerance::new(0.0, TARGET_RADIUS).margin(TARGET_RADIUS).eval(dist)?;
        let control = Tolerance::new(0.0, 0.0)
            .margin(1.0)
            .sigmoid(Sigmoid::Quadratic)
            .value_at_margin(0.0)
            .eval_all(&physics.data().ctrl)?;
        let small_control = (4.0 + control.iter().sum::<f64>() / 2.0) / 5.0;
        Ok(near * small_control)
    }
}
