mod common;

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use common::*;
use ctrlforge::engine::{self, spatial, unit_mass_properties, Data, EngineError, GeomType};
use ctrlforge::modeldom::{set_debug, Attrs, ModelRoot, Namespace};
use nalgebra::{DVector, Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn swing_model_forward_kinematics_matches_printed_values() {
    let root = ModelRoot::from_xml(SWING_XML).unwrap();
    let (m, mut d) = compiled(&root);
    assert_eq!((m.nbody(), m.nq(), m.geoms.len()), (2, 1, 2));
    assert_eq!(m.id2name(Namespace::Geom, 0), Some("red_box"));
    let sphere = m.name2id(Namespace::Geom, "green_sphere").unwrap();
    let p = d.geom_xpos[sphere];
    // Rz(-30°) applied to (.2,.2,.2)
    let (c, s) = ((30f64).to_radians().cos(), (30f64).to_radians().sin());
    let expected = Vector3::new(0.2 * (c + s), 0.2 * (c - s), 0.2);
    assert_abs_diff_eq!(p, expected, epsilon = 1e-12);
    assert_abs_diff_eq!(p, Vector3::new(0.273, 0.0732, 0.2), epsilon = 5e-4);

    d.qpos[0] = PI;
    engine::forward(&m, &mut d).unwrap();
    assert_abs_diff_eq!(d.geom_xpos[sphere].z, -0.6, epsilon = 1e-12);
}

#[test]
fn quaternion_conversion() {
    let r = spatial::quat_wxyz(&[0.5, 0.5, 0.5, 0.5]).to_rotation_matrix();
    let expected = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    assert_abs_diff_eq!(*r.matrix(), expected, epsilon = 1e-12);
    let r = spatial::quat_wxyz(&[0.0, 1.0, 0.0, 0.0]).to_rotation_matrix();
    assert_abs_diff_eq!(*r.matrix(), Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)), epsilon = 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = *spatial::quat_wxyz(&q).to_rotation_matrix().matrix();
        assert_abs_diff_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn zero_quaternion_is_rejected() {
    let err = ModelRoot::from_xml(
        r#"<mujoco><worldbody><body quat="0 0 0 0"><geom size=".1"/></body></worldbody></mujoco>"#,
    )
    .and_then(|r| Ok(engine::compile(&r)))
    .unwrap()
    .unwrap_err();
    assert!(err.to_string().contains("quaternion"), "{err}");
}

#[test]
fn euler_conversion() {
    assert_eq!(spatial::euler_xyz(&[0.0; 3]), UnitQuaternion::identity());
    let q = spatial::euler_xyz(&[PI, 0.0, 0.0]).into_inner();
    assert_abs_diff_eq!(q.w.abs(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(q.i.abs(), 1.0, epsilon = 1e-12);
    // intrinsic x-y-z composition
    let (a, b, c) = (0.3, -0.7, 1.1);
    let r = spatial::euler_xyz(&[a, b, c]).to_rotation_matrix();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos());
    let ry = Matrix3::new(b.cos(), 0.0, b.sin(), 0.0, 1.0, 0.0, -b.sin(), 0.0, b.cos());
    let rz = Matrix3::new(c.cos(), -c.sin(), 0.0, c.sin(), c.cos(), 0.0, 0.0, 0.0, 1.0);
    assert_abs_diff_eq!(*r.matrix(), rx * ry * rz, epsilon = 1e-12);
}

#[test]
fn primitive_mass_properties() {
    let (v, i) = unit_mass_properties(GeomType::Sphere, &[0.1, 0.0, 0.0]);
    let mass = v * 1000.0;
    assert_abs_diff_eq!(mass, 4.0 / 3.0 * PI * 0.001 * 1000.0, epsilon = 1e-12);
    assert_abs_diff_eq!(mass, 4.18879, epsilon = 1e-5);
    assert_abs_diff_eq!(i * 1000.0, Vector3::repeat(0.4 * mass * 0.01), epsilon = 1e-12);

    let (_, i) = unit_mass_properties(GeomType::Box, &[0.3, 0.3, 0.3]);
    assert_eq!(i.x, i.y);
    assert_eq!(i.y, i.z);

    let (vc, _) = unit_mass_properties(GeomType::Cylinder, &[0.1, 0.4, 0.0]);
    let (vk, _) = unit_mass_properties(GeomType::Capsule, &[0.1, 0.4, 0.0]);
    assert!(vk > vc);
}

/// Voxel integration of a capsule aligned with z.
fn capsule_inertia_numeric(r: f64, h: f64) -> (f64, Vector3<f64>) {
    let n = 160;
    let (ex, ez) = (r, h + r);
    let (dx, dz) = (2.0 * ex / n as f64, 2.0 * ez / n as f64);
    let (mut vol, mut ixx, mut izz) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = -ex + (i as f64 + 0.5) * dx;
        for j in 0..n {
            let y = -ex + (j as f64 + 0.5) * dx;
            for k in 0..n {
                let z = -ez + (k as f64 + 0.5) * dz;
                let axial = (z.abs() - h).max(0.0);
                if x * x + y * y + axial * axial <= r * r {
                    let dv = dx * dx * dz;
                    vol += dv;
                    ixx += (y * y + z * z) * dv;
                    izz += (x * x + y * y) * dv;
                }
            }
        }
    }
    (vol, Vector3::new(ixx, ixx, izz))
}

#[test]
fn capsule_inertia_matches_numeric_integration() {
    let (r, h) = (0.1, 0.25);
    let (v, i) = unit_mass_properties(GeomType::Capsule, &[r, h, 0.0]);
    let (vn, inum) = capsule_inertia_numeric(r, h);
    assert!(((v - vn) / v).abs() < 0.01, "{v} vs {vn}");
    for k in 0..3 {
        assert!(((i[k] - inum[k]) / i[k]).abs() < 0.01, "{i} vs {inum}");
    }
}

#[test]
fn pendulum_mass_matrix_and_bias() {
    let (l, r) = (0.7, 0.05);
    let root = ModelRoot::from_xml(&pendulum_xml(l, r)).unwrap();
    let (m, mut d) = compiled(&root);
    let mass = m.bodies[1].mass;
    let inertia = mass * l * l + 0.4 * mass * r * r;
    assert_abs_diff_eq!(d.qm[(0, 0)], inertia, epsilon = 1e-10);
    // hanging straight down: equilibrium
    assert_abs_diff_eq!(d.qfrc_bias[0], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(d.qacc[0], 0.0, epsilon = 1e-12);
    // horizontal: bob at +x after rotating -90° about y
    d.qpos[0] = -PI / 2.0;
    engine::forward(&m, &mut d).unwrap();
    let g = 9.81;
    assert_abs_diff_eq!(d.geom_xpos[0], Vector3::new(l, 0.0, 0.0), epsilon = 1e-12);
    // gravity pulls the bob down, rotating it back toward -z (positive about y)
    assert_abs_diff_eq!(d.qfrc_bias[0], -mass * g * l, epsilon = 1e-9);
    assert_abs_diff_eq!(d.qacc[0], mass * g * l / inertia, epsilon = 1e-9);
}

#[test]
fn mass_matrix_matches_kinetic_energy_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let root = random_model(&mut rng, 5);
        let (m, mut d) = compiled(&root);
        random_state(&mut rng, &m, &mut d);
        engine::forward(&m, &mut d).unwrap();
        let oracle = oracle_mass_matrix(&m, &d.qpos);
        let scale = d.qm.amax().max(1.0);
        assert!((&d.qm - &oracle).amax() / scale < 1e-6, "{}\n{}", d.qm, oracle);
        assert!((&d.qm - d.qm.transpose()).amax() <= 1e-12);
        assert!(d.qm.clone().cholesky().is_some());
    }
}

#[test]
fn crba_columns_equal_unit_acceleration_inverse_dynamics() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.gen_range(1..=6);
        let root = random_model(&mut rng, n);
        let (m, mut d) = compiled(&root);
        for _ in 0..10 {
            random_state(&mut rng, &m, &mut d);
            d.qvel.iter_mut().for_each(|v| *v = 0.0);
            engine::forward(&m, &mut d).unwrap();
            for i in 0..m.nv() {
                let mut e = vec![0.0; m.nv()];
                e[i] = 1.0;
                let col = engine::rnea(&m, &d, &e, false);
                for j in 0..m.nv() {
                    assert!((d.qm[(j, i)] - col[j]).abs() < 1e-9);
                }
            }
        }
    }
}

/// Lagrangian oracle for the bias term: c = Ṁv − ½∂(vᵀMv)/∂q + ∂V/∂q.
#[test]
fn bias_forces_match_lagrangian_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let root = random_model(&mut rng, 4);
        let (m, mut d) = compiled(&root);
        random_state(&mut rng, &m, &mut d);
        engine::forward(&m, &mut d).unwrap();
        let n = m.nv();
        let eps = 1e-5;
        let eval = |q: &[f64]| {
            let mut dd = Data::new(&m);
            dd.qpos.copy_from_slice(q);
            engine::forward(&m, &mut dd).unwrap();
            (dd.qm.clone(), dd.energy[0])
        };
        let v = DVector::from_column_slice(&d.qvel);
        let mut mdot = nalgebra::DMatrix::zeros(n, n);
        let mut grad = DVector::zeros(n);
        for k in 0..n {
            let mut qp = d.qpos.clone();
            let mut qm = d.qpos.clone();
            qp[k] += eps;
            qm[k] -= eps;
            let (mp, vp) = eval(&qp);
            let (mm, vm) = eval(&qm);
            let dm = (&mp - &mm) / (2.0 * eps);
            mdot += &dm * v[k];
            grad[k] = -0.5 * v.dot(&(&dm * &v)) + (vp - vm) / (2.0 * eps);
        }
        let oracle = &mdot * &v + grad;
        let bias = DVector::from_column_slice(&d.qfrc_bias);
        let scale = oracle.amax().max(1.0);
        assert!((&bias - &oracle).amax() / scale < 1e-5, "{bias} vs {oracle}");
    }
}

fn total_energy(d: &Data) -> f64 {
    d.energy[0] + d.energy[1]
}

#[test]
fn rk4_conserves_energy_of_double_pendulum() {
    let (m, mut d) = compiled(&double_pendulum(0.0));
    d.qpos = vec![1.2, -0.7];
    engine::forward(&m, &mut d).unwrap();
    let e0 = total_energy(&d);
    for _ in 0..1000 {
        engine::step(&m, &mut d).unwrap();
    }
    let drift = ((total_energy(&d) - e0) / e0).abs();
    assert!(drift < 1e-5, "drift {drift}");
}

fn final_state(h: f64, t: f64) -> Vec<f64> {
    let (mut m, _) = compiled(&double_pendulum(0.0));
    m.opt.timestep = h;
    let mut d = Data::new(&m);
    d.qpos = vec![1.2, -0.7];
    engine::forward(&m, &mut d).unwrap();
    for _ in 0..(t / h).round() as usize {
        engine::step(&m, &mut d).unwrap();
    }
    d.qpos.iter().chain(&d.qvel).copied().collect()
}

#[test]
fn rk4_is_fourth_order() {
    let (h, t) = (0.02, 1.0);
    let reference = final_state(h / 8.0, t);
    let err = |x: Vec<f64>| {
        x.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(final_state(h, t)) / err(final_state(h / 2.0, t));
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn semi_implicit_euler_energy_stays_bounded() {
    let root = ModelRoot::from_xml(&pendulum_xml(0.5, 0.05)).unwrap();
    let (m, mut d) = compiled(&root);
    d.qpos[0] = 1.0;
    engine::forward(&m, &mut d).unwrap();
    let e0 = total_energy(&d);
    let swing = (m.bodies[1].mass * 9.81 * 0.5).abs();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        engine::step(&m, &mut d).unwrap();
        worst = worst.max((total_energy(&d) - e0).abs());
    }
    assert!(worst / swing < 0.02, "{worst}");
}

#[test]
fn damped_pendulum_loses_energy_every_step() {
    let (m, mut d) = compiled(&double_pendulum(0.5));
    d.qpos = vec![1.0, 0.5];
    engine::forward(&m, &mut d).unwrap();
    let mut last = total_energy(&d);
    for _ in 0..500 {
        engine::step(&m, &mut d).unwrap();
        let e = total_energy(&d);
        assert!(e < last);
        last = e;
    }
}

#[test]
fn free_slide_moves_at_constant_velocity() {
    let root = ModelRoot::from_xml(
        r#"<mujoco><option timestep="0.01"/><worldbody><body>
           <joint type="slide" axis="1 0 0"/><geom size=".1"/></body></worldbody></mujoco>"#,
    )
    .unwrap();
    let (m, mut d) = compiled(&root);
    d.qvel[0] = 1.0;
    engine::forward(&m, &mut d).unwrap();
    engine::step(&m, &mut d).unwrap();
    assert_eq!(d.qpos[0], 0.01);
    assert_eq!(d.time, 0.01);
}

#[test]
fn actuators_and_passive_forces() {
    let root = ModelRoot::from_xml(
        r#"<mujoco><option gravity="0 0 0"/><worldbody><body>
           <joint name="a" type="slide" axis="1 0 0" damping="2"/>
           <joint name="b" type="slide" axis="0 1 0" stiffness="3" springref="0.5"/>
           <geom size=".1"/></body></worldbody>
           <actuator><motor joint="a" gear="1" ctrlrange="-1 1"/><position joint="b" kp="10"/></actuator>
           </mujoco>"#,
    )
    .unwrap();
    let (m, mut d) = compiled(&root);
    d.ctrl = vec![0.5, 0.1];
    engine::forward(&m, &mut d).unwrap();
    assert_eq!(d.qfrc_actuator, vec![0.5, 1.0]);
    d.ctrl = vec![7.0, 0.0];
    d.qvel = vec![1.0, 0.0];
    engine::forward(&m, &mut d).unwrap();
    assert_eq!(d.actuator_force[0], 1.0);
    assert_eq!(d.qfrc_passive, vec![-2.0, 1.5]);
    d.qpos[1] = 0.3;
    d.ctrl[1] = 0.3;
    engine::forward(&m, &mut d).unwrap();
    assert_eq!(d.actuator_force[1], 0.0);
}

#[test]
fn drag_is_anisotropic_and_vanishes_without_medium() {
    let xml = |density: f64, axis: &str| {
        format!(
            r#"<mujoco><option gravity="0 0 0" density="{density}"/><worldbody><body>
               <joint type="slide" axis="{axis}"/>
               <geom type="capsule" fromto="0 0 0 1 0 0" size="0.05"/></body></worldbody></mujoco>"#
        )
    };
    let drag = |density: f64, axis: &str| {
        let (m, mut d) = compiled(&ModelRoot::from_xml(&xml(density, axis)).unwrap());
        d.qvel[0] = 1.0;
        engine::forward(&m, &mut d).unwrap();
        d.qfrc_applied[0]
    };
    assert_eq!(drag(0.0, "0 1 0"), 0.0);
    let along = drag(1000.0, "1 0 0");
    let across = drag(1000.0, "0 1 0");
    assert!(along < 0.0 && across < 0.0);
    assert!(across.abs() > along.abs());
}

#[test]
fn stepping_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let root = random_model(&mut rng, 6);
    let (m, mut d) = compiled(&root);
    random_state(&mut rng, &m, &mut d);
    engine::forward(&m, &mut d).unwrap();
    let mut a = d.clone();
    let mut b = d;
    for _ in 0..100 {
        engine::step(&m, &mut a).unwrap();
        engine::step(&m, &mut b).unwrap();
    }
    assert_eq!(a.qpos, b.qpos);
    assert_eq!(a.qvel, b.qvel);
}

#[test]
fn divergence_is_reported() {
    let root = ModelRoot::from_xml(&pendulum_xml(0.5, 0.05)).unwrap();
    let (m, mut d) = compiled(&root);
    d.qvel[0] = f64::NAN;
    assert!(matches!(
        engine::step(&m, &mut d),
        Err(EngineError::Diverged { .. })
    ));
}

#[test]
fn unsupported_and_massless_models_are_rejected() {
    let root = ModelRoot::from_xml(
        r#"<mujoco><worldbody><body name="b"><freejoint/><geom size=".1"/></body></worldbody></mujoco>"#,
    )
    .unwrap();
    let err = engine::compile(&root).unwrap_err();
    assert!(err.to_string().contains("free joints"), "{err}");

    let root = ModelRoot::from_xml(
        r#"<mujoco><worldbody><body name="ghost"><joint/></body></worldbody></mujoco>"#,
    )
    .unwrap();
    let err = engine::compile(&root).unwrap_err().to_string();
    assert!(err.contains("'ghost'") && err.contains("no mass"), "{err}");
    assert!(err.contains("CTRLFORGE_DEBUG=1"), "{err}");

    let root = ModelRoot::from_xml(
        r#"<mujoco><worldbody><geom type="box" size="1 -1 1"/></worldbody></mujoco>"#,
    )
    .unwrap();
    assert!(engine::compile(&root).is_err());
}

#[test]
fn compile_errors_carry_provenance_in_debug_mode() {
    let mut root = ModelRoot::with_debug("m", true);
    let b = root.add(root.worldbody(), "body", Attrs::new().set("name", "b")).unwrap();
    root.add(b, "joint", Attrs::new()).unwrap();
    let line = line!() + 1;
    root.add(b, "geom", Attrs::new().set("size", [0.1]).set("mass", 0.0)).unwrap();
    let err = engine::compile(&root).unwrap_err().to_string();
    assert!(err.contains("tests/engine.rs"), "{err}");
    let _ = line;
    set_debug(false);
}

#[test]
fn composed_creature_compiles_to_expected_counts() {
    let mut creature = ModelRoot::new("creature");
    creature.set(creature.compiler(), "angle", "radian").unwrap();
    creature
        .add(
            creature.worldbody(),
            "geom",
            Attrs::new().set("type", "ellipsoid").set("size", [0.2, 0.2, 0.1]),
        )
        .unwrap();
    for i in 0..4 {
        let theta = i as f64 * PI / 2.0;
        let site = creature
            .add(
                creature.worldbody(),
                "site",
                Attrs::new()
                    .set("pos", [0.2 * theta.cos(), 0.2 * theta.sin(), 0.0])
                    .set("euler", [0.0, 0.0, theta]),
            )
            .unwrap();
        let mut leg = ModelRoot::new("leg");
        let dj = leg.defaults_for("joint").unwrap();
        leg.set(dj, "damping", 2.0).unwrap();
        let thigh = leg.add(leg.worldbody(), "body", Attrs::new().set("name", "thigh")).unwrap();
        let hip = leg.add(thigh, "joint", Attrs::new().set("name", "hip").set("axis", [0.0, 0.0, 1.0])).unwrap();
        leg.add(thigh, "geom", Attrs::new().set("type", "capsule").set("fromto", [0.0, 0.0, 0.0, 0.2, 0.0, 0.0]).set("size", [0.05])).unwrap();
        let shin = leg.add(thigh, "body", Attrs::new().set("name", "shin").set("pos", [0.2, 0.0, 0.0])).unwrap();
        let knee = leg.add(shin, "joint", Attrs::new().set("name", "knee").set("axis", [0.0, 1.0, 0.0])).unwrap();
        leg.add(shin, "geom", Attrs::new().set("type", "capsule").set("fromto", [0.0, 0.0, 0.0, 0.0, 0.0, -0.2]).set("size", [0.04])).unwrap();
        leg.add(leg.actuator(), "position", Attrs::new().set("joint", hip).set("kp", 10.0)).unwrap();
        leg.add(leg.actuator(), "position", Attrs::new().set("joint", knee).set("kp", 10.0)).unwrap();
        creature.attach(site, leg).unwrap();
    }
    let m = engine::compile(&creature).unwrap();
    assert_eq!((m.nq(), m.nu()), (8, 8));
    assert_eq!(m.joints[0].damping, 2.0);
    assert_eq!(m.id2name(Namespace::Joint, 7), Some("leg_3/knee"));
    // the leg at 90° yaw has its thigh pointing along +y
    let mut d = Data::new(&m);
    engine::forward(&m, &mut d).unwrap();
    let shin = m.name2id(Namespace::Body, "leg_1/shin").unwrap();
    assert_abs_diff_eq!(d.xpos[shin], Vector3::new(0.0, 0.4, 0.0), epsilon = 1e-12);
}
