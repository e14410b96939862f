use nalgebra::{DMatrix, Matrix3, UnitQuaternion, Vector3};

use super::model::CompiledModel;
use super::spatial::{Mat6, Vec6};

/// Simulation state plus quantities derived from it.
#[derive(Clone, Debug)]
pub struct Data {
    pub time: f64,
    pub qpos: Vec<f64>,
    pub qvel: Vec<f64>,
    pub ctrl: Vec<f64>,
    /// External wrench per body at its centre of mass: force then torque, world frame.
    pub xfrc_applied: Vec<[f64; 6]>,

    pub qacc: Vec<f64>,
    pub xpos: Vec<Vector3<f64>>,
    pub xquat: Vec<UnitQuaternion<f64>>,
    /// Centre of mass per body, world frame.
    pub xipos: Vec<Vector3<f64>>,
    pub xanchor: Vec<Vector3<f64>>,
    pub xaxis: Vec<Vector3<f64>>,
    pub geom_xpos: Vec<Vector3<f64>>,
    pub geom_xmat: Vec<Matrix3<f64>>,
    pub site_xpos: Vec<Vector3<f64>>,
    pub site_xmat: Vec<Matrix3<f64>>,
    pub cam_xpos: Vec<Vector3<f64>>,
    pub cam_xmat: Vec<Matrix3<f64>>,
    pub light_xpos: Vec<Vector3<f64>>,
    pub light_xdir: Vec<Vector3<f64>>,
    /// Motion subspace per degree of freedom.
    pub cdof: Vec<Vec6>,
    /// Spatial inertia per body at the world origin.
    pub cinert: Vec<Mat6>,
    /// Spatial velocity per body.
    pub cvel: Vec<Vec6>,
    pub qm: DMatrix<f64>,
    pub qfrc_bias: Vec<f64>,
    pub qfrc_passive: Vec<f64>,
    pub qfrc_actuator: Vec<f64>,
    /// Drag and external wrenches mapped to joint space.
    pub qfrc_applied: Vec<f64>,
    pub actuator_force: Vec<f64>,
    pub sensordata: Vec<f64>,
    /// Potential and kinetic energy.
    pub energy: [f64; 2],
}

impl Data {
    pub fn new(m: &CompiledModel) -> Data {
        let (nv, nb) = (m.nv(), m.nbody());
        Data {
            time: 0.0,
            qpos: m.qpos0(),
            qvel: vec![0.0; nv],
            ctrl: vec![0.0; m.nu()],
            xfrc_applied: vec![[0.0; 6]; nb],
            qacc: vec![0.0; nv],
            xpos: vec![Vector3::zeros(); nb],
            xquat: vec![UnitQuaternion::identity(); nb],
            xipos: vec![Vector3::zeros(); nb],
            xanchor: vec![Vector3::zeros(); nv],
            xaxis: vec![Vector3::zeros(); nv],
            geom_xpos: vec![Vector3::zeros(); m.geoms.len()],
            geom_xmat: vec![Matrix3::identity(); m.geoms.len()],
            site_xpos: vec![Vector3::zeros(); m.sites.len()],
            site_xmat: vec![Matrix3::identity(); m.sites.len()],
            cam_xpos: vec![Vector3::zeros(); m.cameras.len()],
            cam_xmat: vec![Matrix3::identity(); m.cameras.len()],
            light_xpos: vec![Vector3::zeros(); m.lights.len()],
            light_xdir: vec![Vector3::zeros(); m.lights.len()],
            cdof: vec![Vec6::zeros(); nv],
            cinert: vec![Mat6::zeros(); nb],
            cvel: vec![Vec6::zeros(); nb],
            qm: DMatrix::zeros(nv, nv),
            qfrc_bias: vec![0.0; nv],
            qfrc_passive: vec![0.0; nv],
            qfrc_actuator: vec![0.0; nv],
            qfrc_applied: vec![0.0; nv],
            actuator_force: vec![0.0; m.nu()],
            sensordata: vec![0.0; m.sensors.len()],
            energy: [0.0; 2],
        }
    }

    /// Resets the state to the reference configuration.
    pub fn reset(&mut self, m: &CompiledModel) {
        *self = Data::new(m);
    }
}
