//! Cart with k serially hinged poles.
//!
//! `balance` starts near upright (hinges within 5 degrees, cart within
//! 0.1 m). `swingup` and the multi-pole tasks start with the first pole
//! hanging down plus small Gaussian noise. The smooth reward multiplies an
//! uprightness term with soft penalties on cart offset, control and pole
//! angular velocity; the sparse one requires every pole within about 5.7
//! degrees of vertical and the cart within 0.25 m of the centre.

use std::f64::consts::PI;

use super::{body, std_normal, uniform, xz_zz, Domain, ObsFn, ASSETS};
use crate::composer::RandomState;
use crate::physics::Physics;
use crate::rlcore::{tolerance, EnvError, Sigmoid, Tolerance};

pub(crate) struct Cartpole {
    pub poles: usize,
    pub swingup: bool,
    pub sparse: bool,
}

fn pole_name(i: usize) -> String {
    format!("pole_{}", i + 1)
}

/// Cosines then sines of every pole's angle from vertical.
fn pole_angles(p: &Physics, n: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|i| {
            let (xz, zz) = xz_zz(p, body(p, &pole_name(i)));
            (zz, xz)
        })
        .unzip()
}

impl Domain for Cartpole {
    fn xml(&self) -> String {
        let mut poles = String::new();
        for i in 0..self.poles {
            let pos = if i == 0 { "0 0 0" } else { "0 0 1" };
            poles.push_str(&format!(
                r#"<body name="{name}" pos="{pos}">
  <joint name="hinge_{n}" type="hinge" axis="0 1 0" damping="2e-6"/>
  <geom name="{name}" type="capsule" fromto="0 0 0 0 0 1" size="0.045" mass="0.1" material="self"/>
"#,
                name = pole_name(i),
                n = i + 1
            ));
        }
        for _ in 0..self.poles {
            poles.push_str("</body>\n");
        }
        format!(
            r#"<mujoco model="cartpole">
  <option timestep="0.002" integrator="RK4"/>
  {ASSETS}
  <worldbody>
    <light name="light" pos="0 0 6"/>
    <geom name="floor" type="plane" pos="0 0 -0.05" size="4 4 0.2" material="grid"/>
    <camera name="fixed" pos="0 -4 1" euler="90 0 0"/>
    <geom name="rail" type="capsule" fromto="-3 0.07 0 3 0.07 0" size="0.02" material="decoration"/>
    <body name="cart" pos="0 0 1">
      <joint name="slider" type="slide" axis="1 0 0" damping="5e-4"/>
      <geom name="cart" type="box" size="0.2 0.15 0.1" mass="1" material="self"/>
      {poles}
    </body>
  </worldbody>
  <actuator>
    <motor name="slide" joint="slider" gear="10" ctrlrange="-1 1"/>
  </actuator>
</mujoco>"#
        )
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)> {
        let n = self.poles;
        vec![
            (
                "position",
                Box::new(move |p: &Physics| {
                    let (cos, sin) = pole_angles(p, n);
                    let mut v = vec![p.data().qpos[0]];
                    v.extend(cos);
                    v.extend(sin);
                    v
                }),
            ),
            ("velocity", Box::new(|p: &Physics| p.data().qvel.clone())),
        ]
    }

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        let nv = self.poles + 1;
        let mut q = vec![0.0; nv];
        let mut v = vec![0.0; nv];
        if self.swingup {
            q[0] = 0.01 * std_normal(rng);
            q[1] = PI + 0.01 * std_normal(rng);
            for x in &mut q[2..] {
                *x = 0.01 * std_normal(rng);
            }
            for x in &mut v {
                *x = 0.01 * std_normal(rng);
            }
        } else {
            let a = 5f64.to_radians();
            q[0] = uniform(rng, -0.1, 0.1);
            for x in &mut q[1..] {
                *x = uniform(rng, -a, a);
            }
        }
        physics.set_qpos(&q)?;
        physics.set_qvel(&v)?;
        Ok(())
    }

    fn reward(&self, physics: &Physics) -> Result<f64, EnvError> {
        let d = physics.data();
        let x = d.qpos[0];
        let (cos, _) = pole_angles(physics, self.poles);
        if self.sparse {
            let centered = tolerance(x, (-0.25, 0.25), 0.0, Sigmoid::Gaussian, 0.1)?;
            let upright = Tolerance::new(0.995, 1.0).eval_all(&cos)?;
            return Ok(centered * upright.iter().product::<f64>());
        }
        let upright = cos.iter().map(|c| (c + 1.0) / 2.0).sum::<f64>() / cos.len() as f64;
        let centered = (1.0 + Tolerance::new(0.0, 0.0).margin(2.0).eval(x)?) / 2.0;
        let small_control = Tolerance::new(0.0, 0.0)
            .margin(1.0)
            .sigmoid(Sigmoid::Quadratic)
            .value_at_margin(0.0)
            .eval(d.ctrl[0])?;
        let small_control = (4.0 + small_control) / 5.0;
        let small_velocity = Tolerance::new(0.0, 0.0)
            .margin(5.0)
            .eval_all(&d.qvel[1..])?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let small_velocity = (1.0 + small_velocity) / 2.0;
        Ok(upright * small_control * small_velocity * centered)
    }
}
