//! Linear-quadratic regulator on a chain of masses and springs.
//!
//! `n` unit masses slide along x, each attached to its predecessor (the
//! first to the wall) by a spring and a damper. Joints are nested, so joint
//! `i` measures the extension of spring `i`; the first `m` joints carry an
//! unbounded motor. The simulator's integrator is bypassed: every physics
//! step is overwritten with the exact zero-order-hold discretization of the
//! linear system, so the Riccati solution is the true value function.
//!
//! With state `x = [q; qdot]` and control `u`, the stage cost is
//! `h (x'x + c u'u)` with `c = 1e-4`, and the reward is its negation. The episode ends with
//! discount 0 once every state component is below `1e-4` in magnitude.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use super::{Domain, ObsFn};
use crate::composer::RandomState;
use crate::physics::Physics;
use crate::rlcore::{EnvError, Observation};

pub const TIMESTEP: f64 = 0.01;
pub const STIFFNESS: f64 = 1000.0;
pub const DAMPING: f64 = 10.0;
pub const MASS: f64 = 1.0;
/// Weight of the control term in the stage cost. Cheap control lets the
/// optimal policy settle the six-mass chain within one episode.
pub const CONTROL_COST: f64 = 1e-4;
/// Termination threshold on the max-norm of the state.
pub const ORIGIN_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum LqrError {
    #[error("Riccati iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("R + B'PB is not positive definite at iteration {0}")]
    NotPositiveDefinite(usize),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Discrete-time dynamics `x' = A x + B u` with stage cost `x'Qx + u'Ru`.
#[derive(Clone, Debug)]
pub struct LqrSpec {
    pub n: usize,
    pub m: usize,
    pub h: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Continuous-time system the discrete one was derived from.
    pub a_c: DMatrix<f64>,
    pub b_c: DMatrix<f64>,
}

impl LqrSpec {
    /// Chain of `n` masses with the first `m` joints actuated.
    pub fn chain(n: usize, m: usize, h: f64) -> LqrSpec {
        assert!(m <= n && n > 0, "need 0 < n and m <= n");
        // absolute positions are prefix sums of the joint coordinates
        let l = DMatrix::from_fn(n, n, |i, j| if j <= i { 1.0 } else { 0.0 });
        let mass = l.transpose() * l * MASS;
        let minv = mass.try_inverse().expect("chain mass matrix is positive definite");
        let s = DMatrix::from_fn(n, m, |i, j| if i == j { 1.0 } else { 0.0 });
        let mut a_c = DMatrix::zeros(2 * n, 2 * n);
        a_c.view_mut((0, n), (n, n)).fill_with_identity();
        a_c.view_mut((n, 0), (n, n)).copy_from(&(&minv * -STIFFNESS));
        a_c.view_mut((n, n), (n, n)).copy_from(&(&minv * -DAMPING));
        let mut b_c = DMatrix::zeros(2 * n, m);
        b_c.view_mut((n, 0), (n, m)).copy_from(&(&minv * s));
        let (a, b) = zero_order_hold(&a_c, &b_c, h);
        LqrSpec {
            n,
            m,
            h,
            a,
            b,
            q: DMatrix::identity(2 * n, 2 * n) * h,
            r: DMatrix::identity(m, m) * (h * CONTROL_COST),
            a_c,
            b_c,
        }
    }

    pub fn solve(&self) -> Result<RiccatiSolution, LqrError> {
        solve(&self.a, &self.b, &self.q, &self.r, 1e-12, 1_000_000)
    }

    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (x.transpose() * &self.q * x)[0] + (u.transpose() * &self.r * u)[0]
    }
}

/// Exact discretization of `x' = A_c x + B_c u` with `u` held over `h`.
pub fn zero_order_hold(a_c: &DMatrix<f64>, b_c: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (s, m) = (a_c.nrows(), b_c.ncols());
    let mut aug = DMatrix::zeros(s + m, s + m);
    aug.view_mut((0, 0), (s, s)).copy_from(&(a_c * h));
    aug.view_mut((0, s), (s, m)).copy_from(&(b_c * h));
    let e = aug.exp();
    (e.view((0, 0), (s, s)).into_owned(), e.view((0, s), (s, m)).into_owned())
}

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// Value matrix: the optimal cost-to-go from `x` is `x'Px`.
    pub p: DMatrix<f64>,
    /// Optimal gain, `u = -Kx`.
    pub k: DMatrix<f64>,
    pub iterations: usize,
    /// Max-norm of the last update of `P`.
    pub residual: f64,
}

impl RiccatiSolution {
    pub fn control(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.k * x)
    }
}

/// Iterates `P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA` from `P = Q` until the
/// largest entry of the update drops below `tol`.
pub fn solve(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<RiccatiSolution, LqrError> {
    let s = a.nrows();
    let m = b.ncols();
    if a.ncols() != s || b.nrows() != s || q.shape() != (s, s) || r.shape() != (m, m) {
        return Err(LqrError::Shape(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    let mut k = DMatrix::zeros(m, s);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let pa = &p * a;
        let mut next = q + &at * &pa;
        if m > 0 {
            let chol = (r + &bt * &p * b)
                .cholesky()
                .ok_or(LqrError::NotPositiveDefinite(it))?;
            k = chol.solve(&(&bt * &pa));
            next -= &at * &p * b * &k;
        }
        // keep P exactly symmetric so round-off does not accumulate
        let next = (&next + next.transpose()) * 0.5;
        residual = (&next - &p).amax();
        p = next;
        if residual < tol {
            if m > 0 {
                let chol = (r + &bt * &p * b)
                    .cholesky()
                    .ok_or(LqrError::NotPositiveDefinite(it))?;
                k = chol.solve(&(&bt * &p * a));
            }
            return Ok(RiccatiSolution {
                p,
                k,
                iterations: it,
                residual,
            });
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(LqrError::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Largest entry of `Q + A'PA - A'PB (R + B'PB)^-1 B'PA - P`.
pub fn dare_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let mut rhs = q + a.transpose() * p * a;
    if b.ncols() > 0 {
        let g = r + b.transpose() * p * b;
        let gi = g.try_inverse().unwrap_or_else(|| DMatrix::zeros(b.ncols(), b.ncols()));
        rhs -= a.transpose() * p * b * gi * b.transpose() * p * a;
    }
    (rhs - p).amax()
}

/// Reads the LQR state `[qpos; qvel]` out of an observation.
pub fn state_from_observation(obs: &Observation) -> Option<DVector<f64>> {
    let mut x = obs.get("position")?.to_f64_vec();
    x.extend(obs.get("velocity")?.to_f64_vec());
    Some(DVector::from_vec(x))
}

pub(crate) struct LqrDomain {
    spec: LqrSpec,
    /// State and control at the start of the current step.
    x: DVector<f64>,
    u: DVector<f64>,
}

impl LqrDomain {
    pub fn new(n: usize, m: usize) -> LqrDomain {
        LqrDomain {
            spec: LqrSpec::chain(n, m, TIMESTEP),
            x: DVector::zeros(2 * n),
            u: DVector::zeros(m),
        }
    }

    fn state(&self, p: &Physics) -> DVector<f64> {
        let d = p.data();
        DVector::from_iterator(2 * self.spec.n, d.qpos.iter().chain(&d.qvel).copied())
    }
}

impl Domain for LqrDomain {
    fn xml(&self) -> String {
        let n = self.spec.n;
        let mut chain = String::new();
        for i in 0..n {
            chain.push_str(&format!(
                r#"<body name="body_{i}" pos="{dx} 0 0">
  <joint name="joint_{i}" type="slide" axis="1 0 0" stiffness="{STIFFNESS}" damping="{DAMPING}"/>
  <geom name="mass_{i}" type="sphere" size="0.05" mass="{MASS}" material="self"/>
"#,
                dx = if i == 0 { 0.0 } else { 0.25 }
            ));
        }
        for _ in 0..n {
            chain.push_str("</body>\n");
        }
        let motors: String = (0..self.spec.m)
            .map(|i| format!(r#"<motor name="motor_{i}" joint="joint_{i}" gear="1"/>"#))
            .collect::<Vec<_>>()
            .join("\n    ");
        format!(
            r#"<mujoco model="lqr">
  <option timestep="{TIMESTEP}" integrator="RK4" gravity="0 0 0"/>
  {assets}
  <worldbody>
    <light name="light" pos="0 0 2"/>
    <camera name="fixed" pos="{cx} -2.5 0" euler="90 0 0"/>
    <geom name="wall" type="box" pos="-0.1 0 0" size="0.02 0.2 0.2" material="decoration"/>
    <body name="origin" pos="0.25 0 0">
      {chain}
    </body>
  </worldbody>
  <actuator>
    {motors}
  </actuator>
</mujoco>"#,
            assets = super::ASSETS,
            cx = 0.25 * n as f64 / 2.0
        )
    }

    fn control_timestep(&self) -> f64 {
        TIMESTEP
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)> {
        vec![
            ("position", Box::new(|p: &Physics| p.data().qpos.clone())),
            ("velocity", Box::new(|p: &Physics| p.data().qvel.clone())),
        ]
    }

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        let n = self.spec.n;
        let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let q: Vec<f64> = dir.iter().map(|v| v / norm * 2f64.sqrt()).collect();
        physics.set_qpos(&q)?;
        physics.set_qvel(&vec![0.0; n])?;
        self.x = DVector::from_iterator(2 * n, q.into_iter().chain(std::iter::repeat(0.0).take(n)));
        self.u.fill(0.0);
        Ok(())
    }

    fn before_substep(&mut self, physics: &mut Physics) -> Result<(), EnvError> {
        self.x = self.state(physics);
        self.u = DVector::from_column_slice(&physics.data().ctrl);
        Ok(())
    }

    fn after_substep(&mut self, physics: &mut Physics) -> Result<(), EnvError> {
        let n = self.spec.n;
        let next = &self.spec.a * &self.x + &self.spec.b * &self.u;
        let d = physics.data_mut();
        d.qpos.copy_from_slice(&next.as_slice()[..n]);
        d.qvel.copy_from_slice(&next.as_slice()[n..]);
        physics.ensure_position()?;
        Ok(())
    }

    /// Negated stage cost of the transition just taken.
    fn reward(&self, _physics: &Physics) -> Result<f64, EnvError> {
        Ok(-self.spec.stage_cost(&self.x, &self.u))
    }

    fn termination(&self, physics: &Physics) -> Option<f64> {
        (self.state(physics).amax() < ORIGIN_TOLERANCE).then_some(0.0)
    }

    fn lqr(&self) -> Option<&LqrSpec> {
        Some(&self.spec)
    }
}
