//! Spatial (6D) vector algebra in world coordinates, referenced at the world
//! origin. Motion vectors are `[angular; linear]`.

use nalgebra::{Matrix3, Matrix6, Quaternion, UnitQuaternion, Vector3, Vector6};

pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn ang(v: &Vec6) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

pub fn lin(v: &Vec6) -> Vector3<f64> {
    Vector3::new(v[3], v[4], v[5])
}

pub fn join(a: &Vector3<f64>, l: &Vector3<f64>) -> Vec6 {
    Vec6::new(a.x, a.y, a.z, l.x, l.y, l.z)
}

/// Motion cross product `v × m`.
pub fn cross_motion(v: &Vec6, m: &Vec6) -> Vec6 {
    let (w, u) = (ang(v), lin(v));
    let (mw, mu) = (ang(m), lin(m));
    join(&w.cross(&mw), &(w.cross(&mu) + u.cross(&mw)))
}

/// Force cross product `v ×* f`.
pub fn cross_force(v: &Vec6, f: &Vec6) -> Vec6 {
    let (w, u) = (ang(v), lin(v));
    let (n, fl) = (ang(f), lin(f));
    join(&(w.cross(&n) + u.cross(&fl)), &w.cross(&fl))
}

/// Spatial inertia at the origin of a body with mass `m`, centre of mass `c`
/// and rotational inertia `ic` about the centre of mass (world axes).
pub fn spatial_inertia(m: f64, c: &Vector3<f64>, ic: &Matrix3<f64>) -> Mat6 {
    let cx = skew(c);
    let mut out = Mat6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(ic + m * cx * cx.transpose()));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(m * cx));
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(m * cx.transpose()));
    out.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Matrix3::identity() * m));
    out
}

/// Spatial force at the origin for a force applied at point `p`.
pub fn force_at(p: &Vector3<f64>, force: &Vector3<f64>, torque: &Vector3<f64>) -> Vec6 {
    join(&(torque + p.cross(force)), force)
}

/// Quaternion from `w x y z` components, normalized.
pub fn quat_wxyz(q: &[f64]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Intrinsic x-y-z Euler angles in radians: `R = Rx(a) Ry(b) Rz(c)`.
pub fn euler_xyz(e: &[f64]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), e[0])
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), e[1])
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), e[2])
}

/// Rotation taking the z axis onto `dir`.
pub fn z_to(dir: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::rotation_between(&Vector3::z(), dir).unwrap_or_else(|| {
        // antiparallel
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
    })
}
