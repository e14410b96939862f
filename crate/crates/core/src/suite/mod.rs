//! Benchmark tasks over contact-free models.
//!
//! Every task runs RK4 at 2 ms with a 20 ms control step (LQR: 10 ms, one
//! substep) for 1000 control steps. Actions lie in `[-1, 1]` and rewards in
//! `[0, 1]`, except for LQR whose actions and rewards are unbounded. The
//! discount is 1 on every step; LQR ends with discount 0 once the state
//! reaches the origin.
//!
//! Tasks are addressed as `domain:task`, e.g. `cartpole:swingup`.

mod acrobot;
mod cartpole;
pub mod lqr;
mod pendulum;
mod point_mass;
mod reacher;
mod swimmer;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::composer::{actuator_spec, ComposerEnv, Context, EnvConfig, EntityTree, Entity, Observable, RandomState, Task};
use crate::modeldom::{ModelError, ModelRoot, Namespace};
use crate::physics::Physics;
use crate::rlcore::{ArraySpec, EnvError};

pub use lqr::{LqrError, LqrSpec, RiccatiSolution};

/// Environment type returned by [`load`].
pub type SuiteEnv = ComposerEnv<SuiteTask>;

pub const DEFAULT_EPISODE_STEPS: u64 = 1000;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown domain '{0}'")]
    UnknownDomain(String),
    #[error("unknown task '{task}' in domain '{domain}'")]
    UnknownTask { domain: String, task: String },
    #[error("task id '{0}' is not of the form domain:task")]
    BadId(String),
    #[error("unknown tag '{0}', expected benchmarking, extra or all")]
    UnknownTag(String),
    #[error("invalid task argument: {0}")]
    Kwargs(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Benchmarking,
    Extra,
    All,
}

impl Tag {
    pub fn parse(s: &str) -> Result<Tag, SuiteError> {
        match s {
            "benchmarking" => Ok(Tag::Benchmarking),
            "extra" => Ok(Tag::Extra),
            "all" => Ok(Tag::All),
            _ => Err(SuiteError::UnknownTag(s.to_string())),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Benchmarking => "benchmarking",
            Tag::Extra => "extra",
            Tag::All => "all",
        })
    }
}

/// A registered task with its published state, action and observation sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskEntry {
    pub domain: &'static str,
    pub task: &'static str,
    pub benchmarking: bool,
    pub dims: (usize, usize, usize),
}

impl TaskEntry {
    pub fn id(&self) -> String {
        format!("{}:{}", self.domain, self.task)
    }

    pub fn tags(&self) -> &'static [Tag] {
        if self.benchmarking {
            &[Tag::Benchmarking, Tag::All]
        } else {
            &[Tag::Extra, Tag::All]
        }
    }

    pub fn has_tag(&self, tag: Tag) -> bool {
        self.tags().contains(&tag)
    }
}

const fn entry(domain: &'static str, task: &'static str, benchmarking: bool, dims: (usize, usize, usize)) -> TaskEntry {
    TaskEntry {
        domain,
        task,
        benchmarking,
        dims,
    }
}

const REGISTRY: &[TaskEntry] = &[
    entry("acrobot", "swingup", true, (4, 1, 6)),
    entry("acrobot", "swingup_sparse", true, (4, 1, 6)),
    entry("cartpole", "balance", true, (4, 1, 5)),
    entry("cartpole", "balance_sparse", true, (4, 1, 5)),
    entry("cartpole", "swingup", true, (4, 1, 5)),
    entry("cartpole", "swingup_sparse", true, (4, 1, 5)),
    entry("cartpole", "two_poles", false, (6, 1, 8)),
    entry("cartpole", "three_poles", false, (8, 1, 11)),
    entry("lqr", "lqr_2_1", false, (4, 1, 4)),
    entry("lqr", "lqr_6_2", false, (12, 2, 12)),
    entry("pendulum", "swingup", true, (2, 1, 3)),
    entry("point_mass", "easy", true, (4, 2, 4)),
    entry("point_mass", "hard", false, (4, 2, 4)),
    entry("reacher", "easy", true, (4, 2, 6)),
    entry("reacher", "hard", true, (4, 2, 6)),
    entry("swimmer", "swimmer6", true, (16, 5, 25)),
    entry("swimmer", "swimmer15", true, (34, 14, 61)),
];

pub fn all_tasks() -> &'static [TaskEntry] {
    REGISTRY
}

pub fn tasks_with_tag(tag: Tag) -> Vec<TaskEntry> {
    REGISTRY.iter().copied().filter(|e| e.has_tag(tag)).collect()
}

pub fn find(domain: &str, task: &str) -> Result<TaskEntry, SuiteError> {
    if !REGISTRY.iter().any(|e| e.domain == domain) {
        return Err(SuiteError::UnknownDomain(domain.to_string()));
    }
    REGISTRY
        .iter()
        .copied()
        .find(|e| e.domain == domain && e.task == task)
        .ok_or_else(|| SuiteError::UnknownTask {
            domain: domain.to_string(),
            task: task.to_string(),
        })
}

/// Splits `domain:task`.
pub fn parse_id(id: &str) -> Result<(&str, &str), SuiteError> {
    match id.split_once(':') {
        Some((d, t)) if !d.is_empty() && !t.is_empty() => Ok((d, t)),
        _ => Err(SuiteError::BadId(id.to_string())),
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub seed: u64,
    pub visualize_reward: bool,
    /// Episode length in seconds; defaults to 1000 control steps.
    pub time_limit: Option<f64>,
    /// Task arguments: `n_poles` (cartpole), `n_links` (swimmer), `n` and
    /// `m` (lqr).
    pub kwargs: BTreeMap<String, f64>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            seed: 0,
            visualize_reward: false,
            time_limit: None,
            kwargs: BTreeMap::new(),
        }
    }
}

impl LoadOptions {
    pub fn seed(seed: u64) -> LoadOptions {
        LoadOptions {
            seed,
            ..LoadOptions::default()
        }
    }
}

struct Kwargs<'a> {
    map: &'a BTreeMap<String, f64>,
    allowed: &'static [&'static str],
}

impl Kwargs<'_> {
    fn check(&self) -> Result<(), SuiteError> {
        for k in self.map.keys() {
            if !self.allowed.contains(&k.as_str()) {
                return Err(SuiteError::Kwargs(format!("unexpected argument '{k}'")));
            }
        }
        Ok(())
    }

    /// Integer argument with a lower bound.
    fn count(&self, name: &str, default: usize, min: usize) -> Result<usize, SuiteError> {
        let Some(&v) = self.map.get(name) else {
            return Ok(default);
        };
        if v.fract() != 0.0 || v < min as f64 || !v.is_finite() {
            return Err(SuiteError::Kwargs(format!("{name} must be an integer >= {min}, got {v}")));
        }
        Ok(v as usize)
    }
}

pub fn load(domain: &str, task: &str, options: &LoadOptions) -> Result<SuiteEnv, SuiteError> {
    find(domain, task)?;
    let kw = |allowed| Kwargs {
        map: &options.kwargs,
        allowed,
    };
    let d: Box<dyn Domain> = match (domain, task) {
        ("pendulum", "swingup") => {
            kw(&[]).check()?;
            Box::new(pendulum::Pendulum)
        }
        ("acrobot", t) => {
            kw(&[]).check()?;
            Box::new(acrobot::Acrobot {
                sparse: t == "swingup_sparse",
            })
        }
        ("cartpole", t) => {
            let k = kw(&["n_poles"]);
            k.check()?;
            let (poles, swingup, sparse) = match t {
                "balance" => (1, false, false),
                "balance_sparse" => (1, false, true),
                "swingup" => (1, true, false),
                "swingup_sparse" => (1, true, true),
                "two_poles" => (2, true, false),
                _ => (3, true, false),
            };
            Box::new(cartpole::Cartpole {
                poles: k.count("n_poles", poles, 1)?,
                swingup,
                sparse,
            })
        }
        ("point_mass", t) => {
            kw(&[]).check()?;
            Box::new(point_mass::PointMass::new(t == "hard"))
        }
        ("reacher", t) => {
            kw(&[]).check()?;
            Box::new(reacher::Reacher {
                target_size: if t == "easy" { 0.05 } else { 0.015 },
            })
        }
        ("swimmer", t) => {
            let k = kw(&["n_links"]);
            k.check()?;
            let default = if t == "swimmer6" { 6 } else { 15 };
            Box::new(swimmer::Swimmer {
                links: k.count("n_links", default, 2)?,
            })
        }
        ("lqr", t) => {
            let k = kw(&["n", "m"]);
            k.check()?;
            let (n, m) = if t == "lqr_2_1" { (2, 1) } else { (6, 2) };
            let n = k.count("n", n, 1)?;
            let m = k.count("m", m, 1)?;
            if m > n {
                return Err(SuiteError::Kwargs(format!("m = {m} exceeds n = {n}")));
            }
            Box::new(lqr::LqrDomain::new(n, m))
        }
        _ => unreachable!("registry and loader disagree on {domain}:{task}"),
    };
    build(d, options)
}

/// Loads a task by its `domain:task` id.
pub fn load_id(id: &str, options: &LoadOptions) -> Result<SuiteEnv, SuiteError> {
    let (d, t) = parse_id(id)?;
    load(d, t, options)
}

fn build(domain: Box<dyn Domain>, options: &LoadOptions) -> Result<SuiteEnv, SuiteError> {
    let arena = Arena(domain.xml());
    let tree = EntityTree::new(arena)?;
    let ct = domain.control_timestep();
    let task = SuiteTask {
        domain,
        visualize: options.visualize_reward,
        palette: None,
        reward: 0.0,
        discount: 1.0,
        terminate: false,
    };
    let config = EnvConfig {
        seed: options.seed,
        time_limit: options.time_limit.unwrap_or(DEFAULT_EPISODE_STEPS as f64 * ct),
        strip_singleton_buffer_dim: true,
    };
    Ok(ComposerEnv::new(task, tree, config)?)
}

/// The root entity of every suite task: a fixed model.
struct Arena(String);

impl Entity for Arena {
    fn build(&mut self) -> Result<ModelRoot, ModelError> {
        ModelRoot::from_xml(&self.0)
    }
}

type ObsFn = Box<dyn Fn(&Physics) -> Vec<f64> + Send>;

/// Physics and reward definition of one task.
pub(crate) trait Domain: Send {
    fn xml(&self) -> String;

    fn control_timestep(&self) -> f64 {
        0.02
    }

    fn observations(&self) -> Vec<(&'static str, ObsFn)>;

    fn initialize_episode(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError>;

    fn before_step(&mut self, physics: &mut Physics, action: &[f64]) -> Result<(), EnvError> {
        physics.set_control(action)?;
        Ok(())
    }

    fn before_substep(&mut self, _physics: &mut Physics) -> Result<(), EnvError> {
        Ok(())
    }

    fn after_substep(&mut self, _physics: &mut Physics) -> Result<(), EnvError> {
        Ok(())
    }

    fn reward(&self, physics: &Physics) -> Result<f64, EnvError>;

    /// Discount for an early termination, if the episode should end now.
    fn termination(&self, _physics: &Physics) -> Option<f64> {
        None
    }

    fn action_spec(&self, physics: &Physics) -> ArraySpec {
        actuator_spec(physics)
    }

    fn lqr(&self) -> Option<&LqrSpec> {
        None
    }
}

/// Adapts a [`Domain`] to the composer. Reward, discount and termination
/// are computed once per step in `after_step`.
pub struct SuiteTask {
    domain: Box<dyn Domain>,
    visualize: bool,
    /// Base colours of geoms using the `self` material.
    palette: Option<Vec<(usize, [f64; 4])>>,
    reward: f64,
    discount: f64,
    terminate: bool,
}

impl SuiteTask {
    /// Dynamics and cost of the LQR tasks.
    pub fn lqr_spec(&self) -> Option<&LqrSpec> {
        self.domain.lqr()
    }

    fn paint(&mut self, physics: &mut Physics, reward: f64) -> Result<(), EnvError> {
        let palette = self.palette.get_or_insert_with(|| self_geoms(physics));
        let shade = 0.5 + 0.5 * reward.clamp(0.0, 1.0);
        for &(g, base) in palette.iter() {
            physics.set_geom_rgba(g, [base[0] * shade, base[1] * shade, base[2] * shade, base[3]])?;
        }
        Ok(())
    }
}

fn self_geoms(physics: &Physics) -> Vec<(usize, [f64; 4])> {
    let m = physics.model();
    let Some(mat) = m.name2id(Namespace::Material, "self") else {
        return Vec::new();
    };
    m.geoms
        .iter()
        .enumerate()
        .filter(|(_, g)| g.material == Some(mat))
        .map(|(i, g)| (i, g.rgba))
        .collect()
}

impl Task for SuiteTask {
    fn control_timestep(&self) -> Option<f64> {
        Some(self.domain.control_timestep())
    }

    fn observables(&mut self) -> Vec<(String, Observable)> {
        self.domain
            .observations()
            .into_iter()
            .map(|(k, f)| (k.to_string(), Observable::new(move |p| Ok(f(p))).enabled(true)))
            .collect()
    }

    fn action_spec(&self, physics: &Physics) -> ArraySpec {
        self.domain.action_spec(physics)
    }

    fn initialize_episode(&mut self, ctx: &mut Context) -> Result<(), EnvError> {
        self.terminate = false;
        self.domain.initialize_episode(ctx.physics, ctx.rng)?;
        if self.visualize {
            self.paint(ctx.physics, 0.0)?;
        }
        Ok(())
    }

    fn before_step(&mut self, ctx: &mut Context, action: &[f64]) -> Result<(), EnvError> {
        self.domain.before_step(ctx.physics, action)
    }

    fn before_substep(&mut self, ctx: &mut Context, _action: &[f64]) -> Result<(), EnvError> {
        self.domain.before_substep(ctx.physics)
    }

    fn after_substep(&mut self, ctx: &mut Context) -> Result<(), EnvError> {
        self.domain.after_substep(ctx.physics)
    }

    fn after_step(&mut self, ctx: &mut Context) -> Result<(), EnvError> {
        self.reward = self.domain.reward(ctx.physics)?;
        match self.domain.termination(ctx.physics) {
            Some(d) => {
                self.terminate = true;
                self.discount = d;
            }
            None => {
                self.terminate = false;
                self.discount = 1.0;
            }
        }
        if self.visualize {
            self.paint(ctx.physics, self.reward)?;
        }
        Ok(())
    }

    fn get_reward(&mut self, _physics: &Physics) -> Result<f64, EnvError> {
        Ok(self.reward)
    }

    fn get_discount(&mut self, _physics: &Physics) -> f64 {
        self.discount
    }

    fn should_terminate_episode(&mut self, _physics: &Physics) -> bool {
        self.terminate
    }
}

// Shared model pieces.

pub(crate) const ASSETS: &str = r#"
  <asset>
    <texture name="grid" type="2d" builtin="checker" rgb1=".1 .2 .3" rgb2=".2 .3 .4" width="300" height="300"/>
    <material name="grid" texture="grid" texrepeat="1 1"/>
    <material name="self" rgba=".7 .5 .3 1"/>
    <material name="decoration" rgba=".3 .5 .7 1"/>
    <material name="effector" rgba=".7 .4 .2 1"/>
    <material name="target" rgba=".6 .3 .3 1"/>
  </asset>"#;

fn body(p: &Physics, name: &str) -> usize {
    p.name2id(name, Namespace::Body).expect("suite models name their bodies")
}

fn geom(p: &Physics, name: &str) -> usize {
    p.name2id(name, Namespace::Geom).expect("suite models name their geoms")
}

fn site(p: &Physics, name: &str) -> usize {
    p.name2id(name, Namespace::Site).expect("suite models name their sites")
}

fn body_rot(p: &Physics, b: usize) -> Matrix3<f64> {
    p.data().xquat[b].to_rotation_matrix().into_inner()
}

/// World x and z components of a body's z axis.
fn xz_zz(p: &Physics, b: usize) -> (f64, f64) {
    let r = body_rot(p, b);
    (r[(0, 2)], r[(2, 2)])
}

fn geom_pos(p: &Physics, g: usize) -> Vector3<f64> {
    p.data().geom_xpos[g]
}

/// Velocity of a body's frame origin, and its angular velocity, in world
/// coordinates.
fn body_velocity(p: &Physics, b: usize) -> (Vector3<f64>, Vector3<f64>) {
    let v = &p.data().cvel[b];
    let ang = Vector3::new(v[0], v[1], v[2]);
    let lin = Vector3::new(v[3], v[4], v[5]);
    (lin + ang.cross(&p.data().xpos[b]), ang)
}

fn uniform(rng: &mut RandomState, lo: f64, hi: f64) -> f64 {
    rand::Rng::gen_range(rng, lo..hi)
}

fn std_normal(rng: &mut RandomState) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Uniform action within the spec bounds; standard normal along unbounded
/// dimensions.
pub fn random_action(spec: &ArraySpec, rng: &mut impl rand::Rng) -> Vec<f64> {
    let n = spec.size();
    let bound = |b: &Option<Vec<f64>>, i: usize, default: f64| {
        b.as_ref().map_or(default, |v| if v.len() == 1 { v[0] } else { v[i] })
    };
    (0..n)
        .map(|i| {
            let lo = bound(&spec.minimum, i, f64::NEG_INFINITY);
            let hi = bound(&spec.maximum, i, f64::INFINITY);
            if lo.is_finite() && hi.is_finite() {
                rng.gen_range(lo..=hi)
            } else {
                rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
            }
        })
        .collect()
}
