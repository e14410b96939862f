use super::data::Data;
use super::forward::{forward, position_stage};
use super::model::{CompiledModel, Integrator};
use super::EngineError;

/// Advances one timestep. `d` must hold the result of `forward` for its
/// current state; on return it holds the forward result for the new state.
pub fn step(m: &CompiledModel, d: &mut Data) -> Result<(), EngineError> {
    integrate(m, d)?;
    forward(m, d)
}

/// Advances one timestep from a fully forwarded `d`, then recomputes only the
/// position stage at the new state. Forces keep their values from the
/// transition and `qacc` holds its effective acceleration, `(v1 - v0) / h`.
pub fn integrate(m: &CompiledModel, d: &mut Data) -> Result<(), EngineError> {
    match m.opt.integrator {
        Integrator::Euler => euler(m, d),
        Integrator::Rk4 => rk4(m, d)?,
    }
    position_stage(m, d)
}

/// Semi-implicit Euler: velocity first, then position with the new velocity.
fn euler(m: &CompiledModel, d: &mut Data) {
    let h = m.opt.timestep;
    for j in 0..m.nv() {
        d.qvel[j] += h * d.qacc[j];
        d.qpos[j] += h * d.qvel[j];
    }
    d.time += h;
}

/// Classic fourth-order Runge-Kutta with controls held constant.
fn rk4(m: &CompiledModel, d: &mut Data) -> Result<(), EngineError> {
    let h = m.opt.timestep;
    let nv = m.nv();
    let (q0, v0, t0) = (d.qpos.clone(), d.qvel.clone(), d.time);
    let mut dq = [vec![0.0; nv], vec![0.0; nv], vec![0.0; nv], vec![0.0; nv]];
    let mut dv = dq.clone();
    dq[0].copy_from_slice(&d.qvel);
    dv[0].copy_from_slice(&d.qacc);
    let scale = [0.5, 0.5, 1.0];
    for k in 1..4 {
        for j in 0..nv {
            d.qpos[j] = q0[j] + scale[k - 1] * h * dq[k - 1][j];
            d.qvel[j] = v0[j] + scale[k - 1] * h * dv[k - 1][j];
        }
        d.time = t0 + scale[k - 1] * h;
        forward(m, d)?;
        dq[k].copy_from_slice(&d.qvel);
        dv[k].copy_from_slice(&d.qacc);
    }
    for j in 0..nv {
        let acc = (dv[0][j] + 2.0 * dv[1][j] + 2.0 * dv[2][j] + dv[3][j]) / 6.0;
        d.qpos[j] = q0[j] + h / 6.0 * (dq[0][j] + 2.0 * dq[1][j] + 2.0 * dq[2][j] + dq[3][j]);
        d.qvel[j] = v0[j] + h * acc;
        d.qacc[j] = acc;
    }
    d.time = t0 + h;
    Ok(())
}
