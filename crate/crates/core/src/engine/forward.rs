use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};

use super::data::Data;
use super::inertia::projected_areas;
use super::model::{ActuatorKind, CompiledModel, JointType, SensorKind};
use super::spatial::*;
use super::EngineError;

/// Body, joint, geom, site, camera and light poses, plus motion subspaces
/// and spatial inertias.
pub fn kinematics(m: &CompiledModel, d: &mut Data) {
    for b in 1..m.nbody() {
        let body = &m.bodies[b];
        let p = body.parent;
        let mut xquat = d.xquat[p] * body.quat;
        let mut xpos = d.xpos[p] + d.xquat[p] * body.pos;
        for &j in &body.joints {
            let jnt = &m.joints[j];
            let axis = xquat * jnt.axis;
            let anchor = xpos + xquat * jnt.pos;
            d.xaxis[j] = axis;
            d.xanchor[j] = anchor;
            let q = d.qpos[j] - jnt.qpos0;
            match jnt.kind {
                JointType::Hinge => {
                    let rot = UnitQuaternion::from_scaled_axis(jnt.axis * q);
                    xquat *= rot;
                    xpos = anchor - xquat * jnt.pos;
                    d.cdof[j] = join(&axis, &anchor.cross(&axis));
                }
                JointType::Slide => {
                    xpos += axis * q;
                    d.cdof[j] = join(&Vector3::zeros(), &axis);
                }
            }
        }
        d.xquat[b] = xquat;
        d.xpos[b] = xpos;
        d.xipos[b] = xpos + xquat * body.ipos;
        let r = xquat.to_rotation_matrix();
        let ic = r.matrix() * body.inertia * r.matrix().transpose();
        d.cinert[b] = spatial_inertia(body.mass, &d.xipos[b], &ic);
    }
    for (g, geom) in m.geoms.iter().enumerate() {
        let (pos, quat) = (d.xpos[geom.body], d.xquat[geom.body]);
        d.geom_xpos[g] = pos + quat * geom.pos;
        d.geom_xmat[g] = *(quat * geom.quat).to_rotation_matrix().matrix();
    }
    for (s, site) in m.sites.iter().enumerate() {
        let (pos, quat) = (d.xpos[site.body], d.xquat[site.body]);
        d.site_xpos[s] = pos + quat * site.pos;
        d.site_xmat[s] = *(quat * site.quat).to_rotation_matrix().matrix();
    }
    for (c, cam) in m.cameras.iter().enumerate() {
        let (pos, quat) = (d.xpos[cam.body], d.xquat[cam.body]);
        d.cam_xpos[c] = pos + quat * cam.pos;
        d.cam_xmat[c] = *(quat * cam.quat).to_rotation_matrix().matrix();
    }
    for (l, light) in m.lights.iter().enumerate() {
        let (pos, quat) = (d.xpos[light.body], d.xquat[light.body]);
        d.light_xpos[l] = pos + quat * light.pos;
        d.light_xdir[l] = quat * light.dir;
    }
}

/// Spatial body velocities.
pub fn velocity(m: &CompiledModel, d: &mut Data) {
    d.cvel[0] = Vec6::zeros();
    for b in 1..m.nbody() {
        let mut v = d.cvel[m.bodies[b].parent];
        for &j in &m.bodies[b].joints {
            v += d.cdof[j] * d.qvel[j];
        }
        d.cvel[b] = v;
    }
}

/// Joint-space inertia matrix by the composite rigid body algorithm.
pub fn crba(m: &CompiledModel, d: &mut Data) {
    let nv = m.nv();
    let mut crb = d.cinert.clone();
    for b in (1..m.nbody()).rev() {
        let p = m.bodies[b].parent;
        let c = crb[b];
        crb[p] += c;
    }
    let mut qm = DMatrix::zeros(nv, nv);
    for i in 0..nv {
        let f = crb[m.joints[i].body] * d.cdof[i];
        let mut j = Some(i);
        while let Some(k) = j {
            let v = d.cdof[k].dot(&f);
            qm[(i, k)] = v;
            qm[(k, i)] = v;
            j = m.dof_parent[k];
        }
        qm[(i, i)] += m.joints[i].armature;
    }
    d.qm = qm;
}

/// Recursive Newton-Euler inverse dynamics: the joint forces that produce
/// `qacc` at the current position and velocity, including gravity when asked.
pub fn rnea(m: &CompiledModel, d: &Data, qacc: &[f64], gravity: bool) -> Vec<f64> {
    let nb = m.nbody();
    let mut v = vec![Vec6::zeros(); nb];
    let mut a = vec![Vec6::zeros(); nb];
    let mut f = vec![Vec6::zeros(); nb];
    if gravity {
        a[0] = join(&Vector3::zeros(), &(-m.opt.gravity));
    }
    for b in 1..nb {
        let p = m.bodies[b].parent;
        let (mut vb, mut ab) = (v[p], a[p]);
        for &j in &m.bodies[b].joints {
            let s = d.cdof[j];
            ab += cross_motion(&vb, &s) * d.qvel[j] + s * qacc[j];
            vb += s * d.qvel[j];
        }
        v[b] = vb;
        a[b] = ab;
        let inert = d.cinert[b];
        f[b] = inert * ab + cross_force(&vb, &(inert * vb));
    }
    for b in (1..nb).rev() {
        let p = m.bodies[b].parent;
        let fb = f[b];
        f[p] += fb;
    }
    (0..m.nv())
        .map(|j| d.cdof[j].dot(&f[m.joints[j].body]) + m.joints[j].armature * qacc[j])
        .collect()
}

/// Maps a spatial force acting on body `b` to joint space, accumulating into `out`.
fn body_force_to_joints(m: &CompiledModel, d: &Data, b: usize, f: &Vec6, out: &mut [f64]) {
    let mut j = m.bodies[b]
        .joints
        .last()
        .copied()
        .or_else(|| ancestor_dof(m, b));
    while let Some(k) = j {
        out[k] += d.cdof[k].dot(f);
        j = m.dof_parent[k];
    }
}

fn ancestor_dof(m: &CompiledModel, mut b: usize) -> Option<usize> {
    while b != 0 {
        b = m.bodies[b].parent;
        if let Some(&j) = m.bodies[b].joints.last() {
            return Some(j);
        }
    }
    None
}

pub fn passive(m: &CompiledModel, d: &mut Data) {
    for (j, jnt) in m.joints.iter().enumerate() {
        d.qfrc_passive[j] = -jnt.damping * d.qvel[j] - jnt.stiffness * (d.qpos[j] - jnt.springref);
    }
}

pub fn clamp_ctrl(m: &CompiledModel, i: usize, ctrl: f64) -> f64 {
    match m.actuators[i].ctrlrange {
        Some([lo, hi]) => ctrl.clamp(lo, hi),
        None => ctrl,
    }
}

pub fn actuation(m: &CompiledModel, d: &mut Data) {
    d.qfrc_actuator.iter_mut().for_each(|x| *x = 0.0);
    for (i, act) in m.actuators.iter().enumerate() {
        let u = clamp_ctrl(m, i, d.ctrl[i]);
        let j = act.joint;
        let force = match act.kind {
            ActuatorKind::Motor { gear } => gear * u,
            ActuatorKind::Position { kp, kv } => kp * (u - d.qpos[j]) - kv * d.qvel[j],
        };
        d.actuator_force[i] = force;
        d.qfrc_actuator[j] += force;
    }
}

/// Quadratic drag from the surrounding medium and user-applied wrenches.
pub fn applied(m: &CompiledModel, d: &mut Data) {
    let mut out = vec![0.0; m.nv()];
    if m.opt.density > 0.0 {
        for (g, geom) in m.geoms.iter().enumerate() {
            if geom.drag == 0.0 || geom.body == 0 {
                continue;
            }
            let v = d.cvel[geom.body];
            let p = d.geom_xpos[g];
            let vel = lin(&v) + ang(&v).cross(&p);
            let rot = d.geom_xmat[g];
            let local = rot.transpose() * vel;
            let area = projected_areas(geom.kind, &geom.size);
            let local_force = local.zip_zip_map(&area, &Vector3::repeat(geom.drag), |vi, ai, c| {
                -0.5 * m.opt.density * c * ai * vi.abs() * vi
            });
            let force = rot * local_force;
            let f = force_at(&p, &force, &Vector3::zeros());
            body_force_to_joints(m, d, geom.body, &f, &mut out);
        }
    }
    for b in 1..m.nbody() {
        let w = d.xfrc_applied[b];
        if w.iter().all(|x| *x == 0.0) {
            continue;
        }
        let force = Vector3::new(w[0], w[1], w[2]);
        let torque = Vector3::new(w[3], w[4], w[5]);
        let f = force_at(&d.xipos[b], &force, &torque);
        body_force_to_joints(m, d, b, &f, &mut out);
    }
    d.qfrc_applied = out;
}

pub fn sensors(m: &CompiledModel, d: &mut Data) {
    for (i, s) in m.sensors.iter().enumerate() {
        d.sensordata[i] = match s.kind {
            SensorKind::JointPos => d.qpos[s.joint],
            SensorKind::JointVel => d.qvel[s.joint],
        };
    }
}

pub fn energy(m: &CompiledModel, d: &mut Data) {
    let mut potential = 0.0;
    for b in 1..m.nbody() {
        potential -= m.bodies[b].mass * m.opt.gravity.dot(&d.xipos[b]);
    }
    for (j, jnt) in m.joints.iter().enumerate() {
        let dq = d.qpos[j] - jnt.springref;
        potential += 0.5 * jnt.stiffness * dq * dq;
    }
    let v = DVector::from_column_slice(&d.qvel);
    let kinetic = 0.5 * v.dot(&(&d.qm * &v));
    d.energy = [potential, kinetic];
}

pub(crate) fn check_finite(d: &Data) -> Result<(), EngineError> {
    let bad = d
        .qpos
        .iter()
        .chain(&d.qvel)
        .position(|x| !x.is_finite() || x.abs() > 1e10);
    match bad {
        Some(i) => Err(EngineError::Diverged {
            time: d.time,
            dof: i % d.qpos.len().max(1),
        }),
        None => Ok(()),
    }
}

/// Quantities that depend only on `qpos` and `qvel`: frames, inertia,
/// sensors and energy. Forces and `qacc` are left untouched.
pub fn position_stage(m: &CompiledModel, d: &mut Data) -> Result<(), EngineError> {
    check_finite(d)?;
    kinematics(m, d);
    velocity(m, d);
    crba(m, d);
    sensors(m, d);
    energy(m, d);
    Ok(())
}

/// Full forward dynamics: computes every derived quantity and `qacc`.
pub fn forward(m: &CompiledModel, d: &mut Data) -> Result<(), EngineError> {
    check_finite(d)?;
    kinematics(m, d);
    velocity(m, d);
    crba(m, d);
    let zero = vec![0.0; m.nv()];
    d.qfrc_bias = rnea(m, d, &zero, true);
    passive(m, d);
    actuation(m, d);
    applied(m, d);
    sensors(m, d);
    energy(m, d);
    let nv = m.nv();
    if nv == 0 {
        return Ok(());
    }
    let rhs = DVector::from_iterator(
        nv,
        (0..nv).map(|i| d.qfrc_actuator[i] + d.qfrc_passive[i] + d.qfrc_applied[i] - d.qfrc_bias[i]),
    );
    let chol = d
        .qm
        .clone()
        .cholesky()
        .ok_or(EngineError::SingularMassMatrix { time: d.time })?;
    let qacc = chol.solve(&rhs);
    d.qacc.copy_from_slice(qacc.as_slice());
    Ok(())
}
