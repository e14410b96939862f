//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p ctrlforge --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::pipeline::{pipeline_oracle, Agg, GRID};
use common::{compiled, double_pendulum, random_model, random_state, SWING_XML};
use ctrlforge::composer::{ComposerEnv, EnvConfig, Entity, EntityTree, Observable, Task};
use ctrlforge::engine::{self, spatial, Data};
use ctrlforge::modeldom::{Attrs, ModelError, ModelRoot, Namespace};
use ctrlforge::physics::Physics;
use ctrlforge::rlcore::{tolerance, EnvError, Environment, Sigmoid};
use ctrlforge::suite::{self, lqr, LoadOptions};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fk_reference_values() -> Outcome {
    let mut p = Physics::from_xml(SWING_XML).map_err(|e| e.to_string())?;
    let g = p.name2id("green_sphere", Namespace::Geom).map_err(|e| e.to_string())?;
    let at_rest = p.data().geom_xpos[g];
    let err = (at_rest - Vector3::new(0.273, 0.0732, 0.2)).amax();
    ensure(err < 5e-4, || format!("default pose {at_rest:?}, error {err:e}"))?;
    p.set_qpos(&[PI]).map_err(|e| e.to_string())?;
    p.forward().map_err(|e| e.to_string())?;
    let z = p.data().geom_xpos[g].z;
    ensure((z + 0.6).abs() < 5e-4, || format!("z = {z} at swing = pi"))?;
    Ok(format!("max error {err:.1e}, z(pi) = {z:.6}"))
}

fn quaternion_reference_value() -> Outcome {
    let r = *spatial::quat_wxyz(&[0.5, 0.5, 0.5, 0.5]).to_rotation_matrix().matrix();
    let want = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let err = (r - want).amax();
    ensure(err <= 1e-12, || format!("error {err:e}"))?;
    Ok(format!("error {err:.1e}"))
}

fn cheetah_reward() -> Outcome {
    for (v, want) in [(0.0, 0.0), (5.0, 0.5), (10.0, 1.0), (15.0, 1.0)] {
        let r = tolerance(v, (10.0, f64::INFINITY), 10.0, Sigmoid::Linear, 0.0).map_err(|e| e.to_string())?;
        ensure(r == want, || format!("r({v}) = {r}, expected {want}"))?;
    }
    Ok("r(0, 5, 10, 15) = (0, 0.5, 1, 1)".into())
}

fn closed_loop_cost(spec: &lqr::LqrSpec, k: &DMatrix<f64>, mut x: DVector<f64>) -> f64 {
    let mut cost = 0.0;
    for _ in 0..1_000_000 {
        let u = -(k * &x);
        let c = spec.stage_cost(&x, &u);
        cost += c;
        if c < 1e-15 || !c.is_finite() {
            break;
        }
        x = &spec.a * &x + &spec.b * &u;
    }
    cost
}

fn lqr_optimality() -> Outcome {
    let one = DMatrix::from_element(1, 1, 1.0);
    let scalar = lqr::solve(&one, &one, &one, &one, 1e-12, 1_000_000).map_err(|e| e.to_string())?;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let perr = (scalar.p[(0, 0)] - phi).abs();
    ensure(perr < 1e-9, || format!("scalar P = {}, error {perr:e}", scalar.p[(0, 0)]))?;

    let spec = lqr::LqrSpec::chain(6, 2, lqr::TIMESTEP);
    let sol = spec.solve().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x0 = DVector::from_fn(12, |_, _| rng.gen_range(-1.0..1.0));
    let value = (x0.transpose() * &sol.p * &x0)[0];
    let optimal = closed_loop_cost(&spec, &sol.k, x0.clone());
    let rel = ((optimal - value) / value).abs();
    ensure(rel < 1e-6, || format!("simulated {optimal} vs x'Px {value}"))?;
    let mut margin = f64::INFINITY;
    for _ in 0..100 {
        let dk = DMatrix::from_fn(2, 12, |_, _| rng.gen_range(-1.0..1.0) * 1e-2);
        let other = closed_loop_cost(&spec, &(&sol.k + dk), x0.clone());
        ensure(other >= optimal, || format!("perturbed gain cost {other} < optimal {optimal}"))?;
        margin = margin.min(other - optimal);
    }
    Ok(format!(
        "P = {:.10}, n=6 m=2 value rel. error {rel:.1e}, smallest perturbation excess {margin:.2e}",
        scalar.p[(0, 0)]
    ))
}

fn total_energy(d: &Data) -> f64 {
    d.energy[0] + d.energy[1]
}

fn double_pendulum_final(h: f64, t: f64) -> Result<Vec<f64>, String> {
    let (mut m, _) = compiled(&double_pendulum(0.0));
    m.opt.timestep = h;
    let mut d = Data::new(&m);
    d.qpos = vec![1.2, -0.7];
    engine::forward(&m, &mut d).map_err(|e| e.to_string())?;
    for _ in 0..(t / h).round() as usize {
        engine::step(&m, &mut d).map_err(|e| e.to_string())?;
    }
    Ok(d.qpos.iter().chain(&d.qvel).copied().collect())
}

fn energy_conservation() -> Outcome {
    let (m, mut d) = compiled(&double_pendulum(0.0));
    ensure(m.opt.timestep == 1e-3, || "model timestep is not 1e-3".into())?;
    d.qpos = vec![1.2, -0.7];
    engine::forward(&m, &mut d).map_err(|e| e.to_string())?;
    let e0 = total_energy(&d);
    for _ in 0..1000 {
        engine::step(&m, &mut d).map_err(|e| e.to_string())?;
    }
    let drift = ((total_energy(&d) - e0) / e0).abs();
    ensure(drift < 1e-5, || format!("relative drift {drift:e}"))?;

    let (h, t) = (0.02, 1.0);
    let reference = double_pendulum_final(h / 8.0, t)?;
    let err = |x: Vec<f64>| x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ratio = err(double_pendulum_final(h, t)?) / err(double_pendulum_final(h / 2.0, t)?);
    ensure((8.0..=32.0).contains(&ratio), || format!("error ratio {ratio}"))?;
    Ok(format!("drift {drift:.1e}, halving-h error ratio {ratio:.1}"))
}

fn crba_rnea() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let (m, mut d) = compiled(&random_model(&mut rng, n));
        for _ in 0..10 {
            random_state(&mut rng, &m, &mut d);
            d.qvel.iter_mut().for_each(|v| *v = 0.0);
            engine::forward(&m, &mut d).map_err(|e| e.to_string())?;
            for i in 0..m.nv() {
                let mut e = vec![0.0; m.nv()];
                e[i] = 1.0;
                let col = engine::rnea(&m, &d, &e, false);
                for j in 0..m.nv() {
                    worst = worst.max((d.qm[(j, i)] - col[j]).abs());
                }
            }
        }
    }
    ensure(worst < 1e-9, || format!("max |M e_i - ID(e_i)| = {worst:e}"))?;
    Ok(format!("200 models x 10 states, max deviation {worst:.1e}"))
}

fn suite_conventions() -> Outcome {
    let mut lines = Vec::new();
    for e in suite::all_tasks() {
        let id = e.id();
        let mut env = suite::load_id(&id, &LoadOptions::seed(1)).map_err(|e| e.to_string())?;
        let lqr = e.domain == "lqr";
        let spec = env.action_spec();
        let (lo, hi) = (spec.minimum.clone().unwrap_or_default(), spec.maximum.clone().unwrap_or_default());
        let bounds_ok = if lqr {
            lo.iter().chain(&hi).all(|v| v.is_infinite())
        } else {
            lo.iter().all(|v| *v == -1.0) && hi.iter().all(|v| *v == 1.0)
        };
        ensure(bounds_ok, || format!("{id}: action bounds {lo:?} {hi:?}"))?;
        let p = env.physics().unwrap().model();
        let obs: usize = env.observation_spec().values().map(|s| s.size()).sum();
        let dims = (p.nq() + p.nv(), spec.size(), obs);
        ensure(dims == e.dims, || format!("{id}: dims {dims:?}, table {:?}", e.dims))?;

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ts = env.reset().map_err(|e| e.to_string())?;
        let (mut steps, mut ret) = (0, 0.0);
        while !ts.is_last() {
            ts = env.step(&suite::random_action(&spec, &mut rng)).map_err(|e| e.to_string())?;
            let (r, g) = (ts.reward.unwrap(), ts.discount.unwrap());
            ensure(lqr || (0.0..=1.0).contains(&r), || format!("{id}: reward {r}"))?;
            ensure(g == 1.0 || (lqr && ts.is_last() && g == 0.0), || format!("{id}: discount {g}"))?;
            ret += r;
            steps += 1;
        }
        ensure(steps == 1000, || format!("{id}: episode of {steps} steps"))?;
        ensure(lqr || (0.0..=1000.0).contains(&ret), || format!("{id}: return {ret}"))?;
        lines.push(format!("{id} {ret:.1}"));
    }
    Ok(format!("{} tasks; returns: {}", lines.len(), lines.join(", ")))
}

struct Arena;

impl Entity for Arena {
    fn build(&mut self) -> Result<ModelRoot, ModelError> {
        ModelRoot::from_xml(
            r#"<mujoco><option timestep="0.002"/><worldbody><body name="b">
               <joint name="x" type="slide" axis="1 0 0"/><geom size="0.1"/></body></worldbody>
               <actuator><motor joint="x" ctrlrange="-1 1"/></actuator></mujoco>"#,
        )
    }
}

struct CounterTask {
    substeps: usize,
    obs: Option<Observable>,
}

impl Task for CounterTask {
    fn control_timestep(&self) -> Option<f64> {
        Some(self.substeps as f64 * 0.002)
    }
    fn observables(&mut self) -> Vec<(String, Observable)> {
        vec![("count".into(), self.obs.take().unwrap())]
    }
    fn get_reward(&mut self, _: &Physics) -> Result<f64, EnvError> {
        Ok(0.0)
    }
}

fn run_pipeline(interval: usize, buffer: usize, delay: usize, agg: Agg, substeps: usize, steps: usize) -> Result<(Vec<Vec<f64>>, usize), String> {
    let calls = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let counter = calls.clone();
    let mut obs = Observable::new(move |p| {
        counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(vec![(p.time() / 0.002).round()])
    })
    .enabled(true)
    .update_interval(interval)
    .buffer_size(buffer)
    .delay(delay);
    if let Some(a) = agg.make() {
        obs = obs.aggregator(a);
    }
    let tree = EntityTree::new(Arena).map_err(|e| e.to_string())?;
    let task = CounterTask { substeps, obs: Some(obs) };
    let mut env = ComposerEnv::new(task, tree, EnvConfig::default()).map_err(|e| e.to_string())?;
    let mut out = vec![env.reset().map_err(|e| e.to_string())?.observation["count"].to_f64_vec()];
    for _ in 0..steps {
        out.push(env.step(&[0.0]).map_err(|e| e.to_string())?.observation["count"].to_f64_vec());
    }
    // the first call is shape inference at construction
    Ok((out, calls.load(std::sync::atomic::Ordering::SeqCst) - 1))
}

fn observable_pipeline() -> Outcome {
    for (interval, buffer, delay, agg) in GRID {
        let (got, calls) = run_pipeline(interval, buffer, delay, agg, 5, 6)?;
        let (want, needed) = pipeline_oracle(interval as u64, buffer, delay as u64, agg, 5, 6);
        let case = format!("interval {interval} buffer {buffer} delay {delay} {agg:?}");
        ensure(got == want, || format!("{case}: {got:?} vs {want:?}"))?;
        ensure(calls == needed, || format!("{case}: {calls} source calls, expected {needed}"))?;
    }
    let (golden, _) = run_pipeline(2, 3, 0, Agg::None, 5, 2)?;
    let want = vec![vec![0.0, 0.0, 0.0], vec![0.0, 2.0, 4.0], vec![6.0, 8.0, 10.0]];
    ensure(golden == want, || format!("golden {golden:?}"))?;
    Ok(format!("{} grid cases and golden match", GRID.len()))
}

fn small_part(depth: u8) -> ModelRoot {
    let mut m = ModelRoot::new("part");
    let b = m.add(m.worldbody(), "body", Attrs::new().set("name", "b")).unwrap();
    m.add(b, "geom", Attrs::new().set("name", "g").set("size", [0.1])).unwrap();
    m.add(b, "site", Attrs::new().set("name", "s")).unwrap();
    if depth > 0 {
        m.attach(b, small_part(depth - 1)).unwrap();
    }
    m
}

fn random_composition(rng: &mut ChaCha8Rng) -> Result<ModelRoot, String> {
    let mut m = ModelRoot::new("root");
    let mut hosts = vec![m.worldbody()];
    for _ in 0..rng.gen_range(0..25) {
        let parent = hosts[rng.gen_range(0..hosts.len())];
        match rng.gen_range(0..4) {
            3 => {
                let frame = m.attach(parent, small_part(rng.gen_range(0..2))).map_err(|e| e.to_string())?;
                hosts.push(frame);
            }
            k => {
                let tag = ["body", "geom", "site"][k];
                let mut attrs = Attrs::new();
                if rng.gen_bool(0.7) {
                    attrs = attrs.set("name", format!("{tag}{}", rng.gen_range(0..6)));
                }
                if tag == "geom" {
                    attrs = attrs.set("size", [0.1]);
                }
                match m.add(parent, tag, attrs) {
                    Ok(el) if tag == "body" => hosts.push(el),
                    Ok(_) | Err(ModelError::DuplicateName { .. }) => {}
                    Err(e) => return Err(e.to_string()),
                }
            }
        }
    }
    Ok(m)
}

fn namespacing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut total = 0;
    for i in 0..1000 {
        let m = random_composition(&mut rng)?;
        for ns in Namespace::ALL {
            let mut ids: Vec<String> = m.find_all(ns).into_iter().filter_map(|e| m.full_identifier(e)).collect();
            let n = ids.len();
            total += n;
            ids.sort();
            ids.dedup();
            ensure(ids.len() == n, || format!("sequence {i}: {} colliding {ns:?} identifiers", n - ids.len()))?;
        }
        let flat = m.flatten().map_err(|e| e.to_string())?;
        let xml = m.to_xml().map_err(|e| e.to_string())?;
        let back = ModelRoot::from_xml(&xml).map_err(|e| e.to_string())?;
        ensure(back.flatten().map_err(|e| e.to_string())? == flat, || format!("sequence {i}: round trip differs"))?;
    }
    Ok(format!("1000 sequences, {total} identifiers, no collisions, all round trips equal"))
}

fn episode_bits(id: &str, seed: u64) -> Result<Vec<u64>, String> {
    let mut env = suite::load_id(id, &LoadOptions::seed(seed)).map_err(|e| e.to_string())?;
    let spec = env.action_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = Vec::new();
    let mut ts = env.reset().map_err(|e| e.to_string())?;
    loop {
        bits.extend(ts.observation.values().flat_map(|a| a.to_f64_vec()).map(f64::to_bits));
        if let Some(r) = ts.reward {
            bits.push(r.to_bits());
        }
        if ts.is_last() {
            break;
        }
        ts = env.step(&suite::random_action(&spec, &mut rng)).map_err(|e| e.to_string())?;
    }
    Ok(bits)
}

fn seed_determinism() -> Outcome {
    for e in suite::all_tasks() {
        let id = e.id();
        let (a, b) = (episode_bits(&id, 42)?, episode_bits(&id, 42)?);
        ensure(a == b, || format!("{id}: streams differ"))?;
    }
    Ok(format!("{} tasks, full episodes bitwise equal", suite::all_tasks().len()))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 10] = [
        ("FK reference values", fk_reference_values, Some(Duration::from_secs(1))),
        ("Quaternion reference value", quaternion_reference_value, None),
        ("Cheetah reward formula", cheetah_reward, None),
        ("LQR optimality", lqr_optimality, Some(Duration::from_secs(10))),
        ("Energy conservation", energy_conservation, None),
        ("CRBA/RNEA equivalence", crba_rnea, None),
        ("Suite conventions", suite_conventions, Some(Duration::from_secs(120))),
        ("Observable pipeline", observable_pipeline, None),
        ("Namespacing", namespacing, None),
        ("Seed determinism", seed_determinism, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took {took:?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({took:.2?})");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
