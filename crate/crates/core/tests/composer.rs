mod common;

use std::sync::{Arc, Mutex};

use approx::assert_abs_diff_eq;
use common::pipeline::{pipeline_oracle, Agg, GRID};
use ctrlforge::composer::variation::{additive, log_normal, multiplicative, normal_scale, uniform, uniform_circle};
use ctrlforge::composer::{
    evaluate_structure, Aggregator, ComposerEnv, Context, EnvConfig, Entity, EntityId, EntityTree, MjcfVariator,
    Observable, PhysicsVariator, RandomState, Structure, Task, Variation,
};
use ctrlforge::modeldom::{Attrs, ElementRef, ModelError, ModelRoot, Namespace};
use ctrlforge::physics::Physics;
use ctrlforge::rlcore::{EnvError, Environment, StepType, TimeStep};
use indexmap::IndexMap;
use proptest::prelude::*;
use rand::SeedableRng;

const H: f64 = 0.002;

const ARENA_XML: &str = r#"
<mujoco model="arena">
  <option timestep="0.002"/>
  <worldbody>
    <body name="slider">
      <joint name="x" type="slide" axis="1 0 0" damping="0.1"/>
      <geom name="puck" type="sphere" size="0.1"/>
    </body>
  </worldbody>
  <actuator>
    <motor name="push" joint="x" ctrlrange="-1 1"/>
  </actuator>
</mujoco>"#;

type Log = Arc<Mutex<Vec<String>>>;

fn push(log: &Log, s: impl Into<String>) {
    log.lock().unwrap().push(s.into());
}

fn substep_of(p: &Physics) -> u64 {
    (p.time() / H).round() as u64
}

/// Counts elapsed substeps; logs every evaluation.
fn counter(log: &Log) -> Observable {
    let log = log.clone();
    Observable::new(move |p| {
        let s = substep_of(p);
        push(&log, format!("observe@{s}"));
        Ok(vec![s as f64])
    })
    .enabled(true)
}

struct Traced {
    label: String,
    xml: Option<String>,
    log: Log,
    fail_in: Option<&'static str>,
    observables: Vec<(String, Observable)>,
}

impl Traced {
    fn new(label: &str, log: &Log) -> Traced {
        Traced {
            label: label.to_string(),
            xml: None,
            log: log.clone(),
            fail_in: None,
            observables: Vec::new(),
        }
    }

    fn arena(log: &Log) -> Traced {
        Traced {
            xml: Some(ARENA_XML.to_string()),
            ..Traced::new("arena", log)
        }
    }

    fn hit(&self, callback: &'static str) -> Result<(), EnvError> {
        push(&self.log, format!("{}.{callback}", self.label));
        if self.fail_in == Some(callback) {
            return Err(EnvError::Invalid("boom".into()));
        }
        Ok(())
    }
}

impl Entity for Traced {
    fn build(&mut self) -> Result<ModelRoot, ModelError> {
        push(&self.log, format!("{}.build", self.label));
        if let Some(xml) = &self.xml {
            return ModelRoot::from_xml(xml);
        }
        let mut m = ModelRoot::new(&self.label);
        let body = m.add(m.worldbody(), "body", Attrs::new().set("name", "body"))?;
        m.add(body, "geom", Attrs::new().set("name", "ball").set("size", [0.05]))?;
        Ok(m)
    }

    fn build_observables(&mut self) -> Vec<(String, Observable)> {
        push(&self.log, format!("{}.build_observables", self.label));
        std::mem::take(&mut self.observables)
    }

    fn initialize_episode_mjcf(&mut self, _: &mut ModelRoot, _: &mut RandomState) -> Result<(), EnvError> {
        self.hit("initialize_episode_mjcf")
    }
    fn initialize_episode(&mut self, _: &mut Physics, _: &mut RandomState) -> Result<(), EnvError> {
        self.hit("initialize_episode")
    }
    fn before_step(&mut self, _: &mut Physics, _: &mut RandomState) -> Result<(), EnvError> {
        self.hit("before_step")
    }
    fn before_substep(&mut self, _: &mut Physics, _: &mut RandomState) -> Result<(), EnvError> {
        self.hit("before_substep")
    }
    fn after_substep(&mut self, _: &mut Physics, _: &mut RandomState) -> Result<(), EnvError> {
        self.hit("after_substep")
    }
    fn after_step(&mut self, _: &mut Physics, _: &mut RandomState) -> Result<(), EnvError> {
        self.hit("after_step")
    }
}

type MjcfHook = Box<dyn FnMut(&mut EntityTree, &mut RandomState) -> Result<(), EnvError> + Send>;
type EpisodeHook = Box<dyn FnMut(&mut Physics, &mut RandomState) -> Result<(), EnvError> + Send>;

struct TracedTask {
    log: Log,
    substeps: usize,
    observables: Vec<(String, Observable)>,
    mjcf_hook: Option<MjcfHook>,
    episode_hook: Option<EpisodeHook>,
    discount: f64,
}

impl TracedTask {
    fn new(log: &Log, substeps: usize) -> TracedTask {
        TracedTask {
            log: log.clone(),
            substeps,
            observables: Vec::new(),
            mjcf_hook: None,
            episode_hook: None,
            discount: 1.0,
        }
    }
}

impl Task for TracedTask {
    fn control_timestep(&self) -> Option<f64> {
        Some(self.substeps as f64 * H)
    }
    fn observables(&mut self) -> Vec<(String, Observable)> {
        std::mem::take(&mut self.observables)
    }
    fn initialize_episode_mjcf(&mut self, entities: &mut EntityTree, rng: &mut RandomState) -> Result<(), EnvError> {
        push(&self.log, "task.initialize_episode_mjcf");
        match &mut self.mjcf_hook {
            Some(f) => f(entities, rng),
            None => Ok(()),
        }
    }
    fn initialize_episode(&mut self, ctx: &mut Context) -> Result<(), EnvError> {
        push(&self.log, "task.initialize_episode");
        match &mut self.episode_hook {
            Some(f) => f(ctx.physics, ctx.rng),
            None => Ok(()),
        }
    }
    fn before_step(&mut self, ctx: &mut Context, action: &[f64]) -> Result<(), EnvError> {
        push(&self.log, "task.before_step");
        ctx.physics.set_control(action)?;
        Ok(())
    }
    fn before_substep(&mut self, _: &mut Context, _: &[f64]) -> Result<(), EnvError> {
        push(&self.log, "task.before_substep");
        Ok(())
    }
    fn after_substep(&mut self, _: &mut Context) -> Result<(), EnvError> {
        push(&self.log, "task.after_substep");
        Ok(())
    }
    fn after_step(&mut self, _: &mut Context) -> Result<(), EnvError> {
        push(&self.log, "task.after_step");
        Ok(())
    }
    fn get_reward(&mut self, physics: &Physics) -> Result<f64, EnvError> {
        push(&self.log, "task.get_reward");
        Ok(physics.data().qpos[0])
    }
    fn get_discount(&mut self, _: &Physics) -> f64 {
        push(&self.log, "task.get_discount");
        self.discount
    }
    fn should_terminate_episode(&mut self, _: &Physics) -> bool {
        push(&self.log, "task.should_terminate_episode");
        false
    }
}

fn take_log(log: &Log) -> Vec<String> {
    std::mem::take(&mut *log.lock().unwrap())
}

fn scalar(ts: &TimeStep, key: &str) -> Vec<f64> {
    ts.observation[key].to_f64_vec()
}

fn counter_env(substeps: usize, obs: Observable, config: EnvConfig) -> ComposerEnv<TracedTask> {
    let log = Log::default();
    let tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let mut task = TracedTask::new(&log, substeps);
    task.observables.push(("count".into(), obs));
    ComposerEnv::new(task, tree, config).unwrap()
}

#[test]
fn callback_order_follows_the_lifecycle() {
    let log = Log::default();
    let mut tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let a = tree.attach(EntityId::ROOT, None, Traced::new("a", &log)).unwrap();
    tree.attach(a, None, Traced::new("a_child", &log)).unwrap();
    tree.attach(EntityId::ROOT, None, Traced::new("b", &log)).unwrap();
    assert_eq!(
        take_log(&log),
        [
            "arena.build",
            "arena.build_observables",
            "a.build",
            "a.build_observables",
            "a_child.build",
            "a_child.build_observables",
            "b.build",
            "b.build_observables"
        ]
    );
    let mut task = TracedTask::new(&log, 3);
    task.observables.push(("count".into(), counter(&log).buffer_size(3)));
    let mut env = ComposerEnv::new(task, tree, EnvConfig::default()).unwrap();
    assert_eq!(take_log(&log), ["observe@0"], "shape inference reads the source once");

    let entities = ["arena", "a", "a_child", "b"];
    let all = |cb: &str| -> Vec<String> {
        std::iter::once(format!("task.{cb}"))
            .chain(entities.iter().map(|e| format!("{e}.{cb}")))
            .collect()
    };

    env.reset().unwrap();
    let mut want = all("initialize_episode_mjcf");
    want.extend(all("initialize_episode"));
    want.push("observe@0".into());
    assert_eq!(take_log(&log), want);

    env.step(&[0.5]).unwrap();
    let mut want = all("before_step");
    for k in 1..=3 {
        want.extend(all("before_substep"));
        want.extend(all("after_substep"));
        if k < 3 {
            want.push(format!("observe@{k}"));
        }
    }
    want.extend(all("after_step"));
    want.push("observe@3".into());
    want.extend(["task.get_reward", "task.get_discount", "task.should_terminate_episode"].map(String::from));
    assert_eq!(take_log(&log), want);
}

#[test]
fn counter_observable_examples() {
    let mut env = counter_env(5, counter(&Log::default()), EnvConfig::default());
    env.reset().unwrap();
    assert_eq!(scalar(&env.step(&[0.0]).unwrap(), "count"), [5.0]);

    let mut env = counter_env(5, counter(&Log::default()).delay(2), EnvConfig::default());
    assert_eq!(scalar(&env.reset().unwrap(), "count"), [0.0]);
    assert_eq!(scalar(&env.step(&[0.0]).unwrap(), "count"), [3.0]);
    assert_eq!(scalar(&env.step(&[0.0]).unwrap(), "count"), [8.0]);
}

fn run_pipeline(interval: usize, buffer: usize, delay: usize, agg: Agg, substeps: usize, steps: usize) -> (Vec<Vec<f64>>, usize) {
    let log = Log::default();
    let mut obs = counter(&log).update_interval(interval).buffer_size(buffer).delay(delay);
    if let Some(a) = agg.make() {
        obs = obs.aggregator(a);
    }
    let mut env = counter_env(substeps, obs, EnvConfig::default());
    let mut out = vec![scalar(&env.reset().unwrap(), "count")];
    for _ in 0..steps {
        out.push(scalar(&env.step(&[0.0]).unwrap(), "count"));
    }
    let calls = log.lock().unwrap().len() - 1;
    (out, calls)
}

#[test]
fn pipeline_grid_matches_oracle() {
    for (interval, buffer, delay, agg) in GRID {
        let (got, calls) = run_pipeline(interval, buffer, delay, agg, 5, 6);
        let (want, needed) = pipeline_oracle(interval as u64, buffer, delay as u64, agg, 5, 6);
        assert_eq!(got, want, "interval {interval} buffer {buffer} delay {delay} {agg:?}");
        assert_eq!(calls, needed, "calls for interval {interval} buffer {buffer} delay {delay}");
    }
}

#[test]
fn pipeline_golden_interval_two_buffer_three() {
    let (got, _) = run_pipeline(2, 3, 0, Agg::None, 5, 2);
    assert_eq!(got, vec![vec![0.0, 0.0, 0.0], vec![0.0, 2.0, 4.0], vec![6.0, 8.0, 10.0]]);
}

#[test]
fn one_evaluation_per_control_step() {
    let log = Log::default();
    let mut env = counter_env(10, counter(&log), EnvConfig::default());
    env.reset().unwrap();
    take_log(&log);
    for k in 1..=20 {
        env.step(&[0.0]).unwrap();
        assert_eq!(take_log(&log), [format!("observe@{}", 10 * k)]);
    }
}

#[test]
fn disabled_observables_are_never_evaluated() {
    let log = Log::default();
    let mut env = counter_env(4, counter(&log).enabled(false), EnvConfig::default());
    assert!(env.observation_spec().is_empty());
    let ts = env.reset().unwrap();
    assert!(ts.observation.is_empty());
    for _ in 0..5 {
        env.step(&[0.0]).unwrap();
    }
    assert!(log.lock().unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn delayed_samples_never_arrive_early(interval in 1usize..5, buffer in 1usize..5, delay in 0usize..12, substeps in 1usize..7) {
        let (got, _) = run_pipeline(interval, buffer, delay, Agg::None, substeps, 8);
        for (k, out) in got.iter().enumerate() {
            let now = (k * substeps) as f64;
            for &s in out {
                prop_assert!(s == 0.0 || s + delay as f64 <= now, "sample {} visible at {}", s, now);
            }
        }
        let (want, _) = pipeline_oracle(interval as u64, buffer, delay as u64, Agg::None, substeps as u64, 8);
        prop_assert_eq!(got, want);
    }
}

#[test]
fn specs_match_emitted_observations() {
    let log = Log::default();
    let mut tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let mut prop = Traced::new("prop", &log);
    prop.observables.push(("stack".into(), counter(&log).buffer_size(4)));
    prop.observables.push(("hidden".into(), counter(&log)));
    tree.attach(EntityId::ROOT, None, prop).unwrap();
    let mut task = TracedTask::new(&log, 2);
    task.observables.push(("count".into(), counter(&log)));
    task.observables.push(("mean".into(), counter(&log).buffer_size(2).aggregator(Aggregator::Mean)));
    let mut env = ComposerEnv::new(task, tree, EnvConfig::default()).unwrap();
    let spec = env.observation_spec();
    assert_eq!(spec.keys().collect::<Vec<_>>(), ["count", "mean", "prop/stack", "prop/hidden"]);
    assert_eq!(spec["prop/stack"].shape, [4, 1]);
    assert_eq!(spec["count"].shape, [1]);
    let mut ts = env.reset().unwrap();
    for _ in 0..3 {
        for (k, s) in &spec {
            s.validate(&ts.observation[k]).unwrap();
        }
        ts = env.step(&[0.0]).unwrap();
    }
    assert_eq!(scalar(&ts, "prop/stack"), [3.0, 4.0, 5.0, 6.0]);
    assert_eq!(scalar(&ts, "mean"), [5.5]);

    let config = EnvConfig {
        strip_singleton_buffer_dim: false,
        ..EnvConfig::default()
    };
    let env = counter_env(2, counter(&Log::default()), config);
    assert_eq!(env.observation_spec()["count"].shape, [1, 1]);
}

#[test]
fn time_limit_ends_with_unit_discount_then_auto_resets() {
    let config = EnvConfig {
        time_limit: 0.05,
        ..EnvConfig::default()
    };
    let mut env = counter_env(5, counter(&Log::default()), config);
    env.reset().unwrap();
    let mut types = Vec::new();
    for _ in 0..6 {
        let ts = env.step(&[0.1]).unwrap();
        if ts.step_type == StepType::Last {
            assert_eq!(ts.discount, Some(1.0));
        }
        types.push(ts.step_type);
    }
    use StepType::*;
    assert_eq!(types, [Mid, Mid, Mid, Mid, Last, First]);
    assert_eq!(env.physics().unwrap().time(), 0.0);
}

#[test]
fn actions_are_validated_against_the_actuator_spec() {
    let mut env = counter_env(2, counter(&Log::default()), EnvConfig::default());
    let spec = env.action_spec();
    assert_eq!(spec.shape, [1]);
    assert_eq!(spec.minimum, Some(vec![-1.0]));
    assert_eq!(spec.maximum, Some(vec![1.0]));
    env.reset().unwrap();
    let err = env.step(&[1.5]).unwrap_err();
    assert!(err.to_string().contains("maximum"), "{err}");
    assert!(env.step(&[0.0, 0.0]).is_err());
}

#[test]
fn control_timestep_must_be_a_multiple() {
    let log = Log::default();
    let tree = EntityTree::new(Traced::arena(&log)).unwrap();
    struct Odd;
    impl Task for Odd {
        fn control_timestep(&self) -> Option<f64> {
            Some(0.003)
        }
        fn get_reward(&mut self, _: &Physics) -> Result<f64, EnvError> {
            Ok(0.0)
        }
    }
    assert!(ComposerEnv::new(Odd, tree, EnvConfig::default()).is_err());
}

#[test]
fn callback_errors_name_callback_and_entity() {
    let log = Log::default();
    let mut tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let mut bad = Traced::new("wheel", &log);
    bad.fail_in = Some("after_substep");
    tree.attach(EntityId::ROOT, None, bad).unwrap();
    let mut env = ComposerEnv::new(TracedTask::new(&log, 2), tree, EnvConfig::default()).unwrap();
    env.reset().unwrap();
    let msg = env.step(&[0.0]).unwrap_err().to_string();
    assert!(msg.contains("after_substep") && msg.contains("wheel"), "{msg}");
}

#[test]
fn entity_tree_prefixes_and_lookup() {
    let log = Log::default();
    let mut tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let a = tree.attach(EntityId::ROOT, None, Traced::new("leg", &log)).unwrap();
    let b = tree.attach(EntityId::ROOT, None, Traced::new("leg", &log)).unwrap();
    let c = tree.attach(a, None, Traced::new("foot", &log)).unwrap();
    assert_eq!(tree.prefix(EntityId::ROOT), "arena/");
    assert_eq!(tree.prefix(a), "leg/");
    assert_eq!(tree.prefix(b), "leg_1/");
    assert_eq!(tree.prefix(c), "leg/foot/");
    assert_eq!(tree.depth_first(), [EntityId::ROOT, a, c, b]);
    assert_eq!(tree.parent(c), Some(a));
    assert_eq!(tree.children(EntityId::ROOT), [a, b]);
    assert_eq!(tree.get::<Traced>(b).unwrap().label, "leg");
    assert!(tree.model().find(Namespace::Geom, "leg/foot/ball").is_some());
    assert!(tree.model().find(Namespace::Geom, "leg_1/ball").is_some());
}

fn obs_stream(seed: u64, steps: usize) -> Vec<(Option<f64>, IndexMap<String, Vec<f64>>)> {
    let log = Log::default();
    let tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let mut task = TracedTask::new(&log, 3);
    let qpos = Observable::new(|p| Ok(p.data().qpos.to_vec()))
        .enabled(true)
        .noise(additive(normal_scale(0.01)))
        .random_delay(|rng| rand::Rng::gen_range(rng, 0..4))
        .random_update_interval(|rng| rand::Rng::gen_range(rng, 1..3))
        .buffer_size(2);
    task.observables.push(("qpos".into(), qpos));
    task.episode_hook = Some(Box::new(|p, rng| {
        let q = uniform(-0.5, 0.5).sample(rng)?;
        p.set_qpos(&q)?;
        Ok(())
    }));
    let config = EnvConfig {
        seed,
        ..EnvConfig::default()
    };
    let mut env = ComposerEnv::new(task, tree, config).unwrap();
    let flat = |ts: TimeStep| {
        (
            ts.reward,
            ts.observation.iter().map(|(k, v)| (k.clone(), v.to_f64_vec())).collect(),
        )
    };
    let mut out = vec![flat(env.reset().unwrap())];
    for i in 0..steps {
        let u = ((i as f64) * 0.7).sin();
        out.push(flat(env.step(&[u]).unwrap()));
    }
    out
}

#[test]
fn equal_seeds_give_identical_streams() {
    let a = obs_stream(7, 50);
    let b = obs_stream(7, 50);
    let bits = |s: &Vec<(Option<f64>, IndexMap<String, Vec<f64>>)>| -> Vec<u64> {
        s.iter()
            .flat_map(|(r, o)| {
                r.iter()
                    .copied()
                    .chain(o.values().flatten().copied())
                    .map(f64::to_bits)
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&obs_stream(8, 50)));
}

#[test]
fn zero_noise_corruptor_is_identity() {
    let clean = counter_env(3, counter(&Log::default()).buffer_size(3), EnvConfig::default());
    let noisy = counter_env(
        3,
        counter(&Log::default()).buffer_size(3).noise(additive(0.0)),
        EnvConfig::default(),
    );
    for mut env in [clean, noisy] {
        env.reset().unwrap();
        let ts = env.step(&[0.0]).unwrap();
        assert_eq!(scalar(&ts, "count"), [1.0, 2.0, 3.0]);
    }
}

fn rng(seed: u64) -> RandomState {
    RandomState::seed_from_u64(seed)
}

#[test]
fn structures_are_evaluated_in_place() {
    let mut r = rng(1);
    let mut map = IndexMap::new();
    map.insert("pos".to_string(), Structure::Variation(uniform_circle(uniform(0.5, 0.75))));
    map.insert("k".to_string(), Structure::from(3.0));
    let s = Structure::List(vec![Structure::from(2.0), Structure::from(uniform(0.0, 1.0)), Structure::Map(map)]);
    for _ in 0..1000 {
        let Structure::List(items) = evaluate_structure(&s, &mut r).unwrap() else {
            panic!()
        };
        let Structure::Value(c) = &items[0] else { panic!() };
        assert_eq!(c, &[2.0]);
        let Structure::Value(u) = &items[1] else { panic!() };
        assert!((0.0..1.0).contains(&u[0]));
        let Structure::Map(m) = &items[2] else { panic!() };
        let Structure::Value(p) = &m["pos"] else { panic!() };
        let radius = p[0].hypot(p[1]);
        assert!((0.5..=0.75).contains(&radius) && p[2] == 0.0, "{p:?}");
    }
}

#[test]
fn arithmetic_composition() {
    let mut r = rng(2);
    let v = uniform(0.0, 1.0) + 1.0;
    for _ in 0..1000 {
        let x = v.sample(&mut r).unwrap()[0];
        assert!((1.0..2.0).contains(&x));
    }
    let w = 2.0 * Variation::Initial - Variation::Current / 4.0;
    assert_eq!(w.evaluate(&[1.0, 2.0], &[4.0, 8.0], &mut r).unwrap(), [1.0, 2.0]);
    assert_eq!((-Variation::from(3.0)).sample(&mut r).unwrap(), [-3.0]);

    // operands draw left to right from the same stream
    let pair = uniform(0.0, 1.0) + uniform(10.0, 11.0);
    let mut a = rng(3);
    let mut b = rng(3);
    let first = uniform(0.0, 1.0).sample(&mut b).unwrap()[0];
    let second = uniform(10.0, 11.0).sample(&mut b).unwrap()[0];
    assert_eq!(pair.sample(&mut a).unwrap()[0], first + second);
}

#[test]
fn additive_normal_noise_statistics() {
    let mut r = rng(4);
    let noise = additive(normal_scale(0.01));
    let q = [0.3, -1.2];
    let n = 100_000;
    let mut err = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        let y = noise.evaluate(&q, &q, &mut r).unwrap();
        for i in 0..2 {
            err[i].push(y[i] - q[i]);
        }
    }
    for e in &err {
        let mean = e.iter().sum::<f64>() / n as f64;
        let sd = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 1e-3, "mean {mean}");
        assert!((sd - 0.01).abs() < 0.0005, "sd {sd}");
    }
}

#[test]
fn multiplicative_log_normal_keeps_sign() {
    let mut r = rng(5);
    let v = multiplicative(log_normal(0.01));
    for _ in 0..10_000 {
        let y = v.evaluate(&[2.0, 0.5], &[2.0, 0.5], &mut r).unwrap();
        assert!(y.iter().all(|&x| x > 0.0));
        assert_abs_diff_eq!(y[0], 2.0, epsilon = 0.1);
    }
    assert_eq!(additive(0.0).evaluate(&[1.5], &[9.0], &mut r).unwrap(), [1.5]);
    assert_eq!(additive(1.0).cumulative().evaluate(&[1.5], &[9.0], &mut r).unwrap(), [10.0]);
}

#[test]
fn invalid_distribution_parameters() {
    let mut r = rng(6);
    assert!(uniform(1.0, 0.0).sample(&mut r).is_err());
    assert!(normal_scale(-1.0).sample(&mut r).is_err());
    assert!(log_normal(-0.5).sample(&mut r).is_err());
    assert!((Variation::from(vec![1.0, 2.0]) + Variation::from(vec![1.0, 2.0, 3.0]))
        .sample(&mut r)
        .is_err());
}

struct VariedTask {
    inner: TracedTask,
    mjcf: MjcfVariator,
    physics: PhysicsVariator,
}

impl Task for VariedTask {
    fn initialize_episode_mjcf(&mut self, entities: &mut EntityTree, rng: &mut RandomState) -> Result<(), EnvError> {
        self.mjcf.apply(entities.model_mut(), rng)
    }
    fn initialize_episode(&mut self, ctx: &mut Context) -> Result<(), EnvError> {
        self.physics.apply(ctx.physics, ctx.rng)
    }
    fn get_reward(&mut self, p: &Physics) -> Result<f64, EnvError> {
        self.inner.get_reward(p)
    }
}

fn puck(tree: &EntityTree) -> ElementRef {
    tree.model().find(Namespace::Geom, "puck").unwrap()
}

#[test]
fn mjcf_variator_resamples_geom_size_each_episode() {
    let log = Log::default();
    let tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let geom = puck(&tree);
    let mut mjcf = MjcfVariator::new();
    mjcf.bind_attribute(geom, "size", uniform(0.9, 1.1) * Variation::Initial);
    let task = VariedTask {
        inner: TracedTask::new(&log, 1),
        mjcf,
        physics: PhysicsVariator::new(),
    };
    let mut env = ComposerEnv::new(task, tree, EnvConfig::default()).unwrap();
    let mut sizes = Vec::new();
    for _ in 0..100 {
        env.reset().unwrap();
        let r = env.physics().unwrap().model().geoms[0].size[0];
        assert!((0.09..=0.11).contains(&r), "{r}");
        let declared = env.entities().model().get(geom, "size").unwrap().unwrap().as_array().unwrap();
        assert_eq!(declared, [r]);
        sizes.push(r);
    }
    sizes.dedup();
    assert!(sizes.len() > 90, "sizes should differ between episodes");
}

#[test]
fn empty_variator_leaves_model_alone() {
    let log = Log::default();
    let mut tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let before = tree.model().to_xml().unwrap();
    MjcfVariator::new().apply(tree.model_mut(), &mut rng(0)).unwrap();
    assert_eq!(tree.model().to_xml().unwrap(), before);
}

#[test]
fn physics_variator_sets_initial_state() {
    let log = Log::default();
    let tree = EntityTree::new(Traced::arena(&log)).unwrap();
    let joint = tree.model().find(Namespace::Joint, "x").unwrap();
    let mut physics = PhysicsVariator::new();
    physics.bind_attribute(joint, "qpos", uniform(-1.0, 1.0));
    let task = VariedTask {
        inner: TracedTask::new(&log, 1),
        mjcf: MjcfVariator::new(),
        physics,
    };
    let mut env = ComposerEnv::new(task, tree, EnvConfig::default()).unwrap();
    let starts: Vec<f64> = (0..10)
        .map(|_| {
            env.reset().unwrap();
            env.physics().unwrap().data().qpos[0]
        })
        .collect();
    assert!(starts.iter().all(|q| q.abs() <= 1.0));
    assert!(starts.windows(2).all(|w| w[0] != w[1]));
}

#[test]
fn reset_twice_gives_two_first_steps() {
    let mut env = counter_env(2, counter(&Log::default()), EnvConfig::default());
    assert!(env.reset().unwrap().is_first());
    env.step(&[0.3]).unwrap();
    let ts = env.reset().unwrap();
    assert!(ts.is_first());
    assert_eq!(scalar(&ts, "count"), [0.0]);
    assert_eq!(env.episode_steps(), 0);
}

