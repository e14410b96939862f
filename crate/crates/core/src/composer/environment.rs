use indexmap::IndexMap;
use rand::SeedableRng;

use super::entity::EntityTree;
use super::observable::{Channel, Observable};
use super::RandomState;
use crate::physics::Physics;
use crate::rlcore::{ArraySpec, EnvError, Environment, Observation, TimeStep};

/// Mutable state handed to task callbacks.
pub struct Context<'a> {
    pub physics: &'a mut Physics,
    pub entities: &'a mut EntityTree,
    pub rng: &'a mut RandomState,
}

/// Action spec from actuator control ranges; unlimited actuators are unbounded.
pub fn actuator_spec(physics: &Physics) -> ArraySpec {
    let m = physics.model();
    let (lo, hi): (Vec<f64>, Vec<f64>) = m
        .actuators
        .iter()
        .map(|a| a.ctrlrange.map_or((f64::NEG_INFINITY, f64::INFINITY), |r| (r[0], r[1])))
        .unzip();
    ArraySpec {
        minimum: Some(if lo.is_empty() { vec![f64::NEG_INFINITY] } else { lo }),
        maximum: Some(if hi.is_empty() { vec![f64::INFINITY] } else { hi }),
        ..ArraySpec::new("action", &[m.nu()])
    }
}

/// Episode logic over an entity tree. Callbacks run task first, then
/// entities depth first.
pub trait Task: Send {
    fn name(&self) -> &str {
        "task"
    }

    /// Agent action period; defaults to one physics timestep. Must be an
    /// integer multiple of the physics timestep.
    fn control_timestep(&self) -> Option<f64> {
        None
    }

    /// Observables owned by the task rather than an entity.
    fn observables(&mut self) -> Vec<(String, Observable)> {
        Vec::new()
    }

    fn action_spec(&self, physics: &Physics) -> ArraySpec {
        actuator_spec(physics)
    }

    fn initialize_episode_mjcf(&mut self, _entities: &mut EntityTree, _rng: &mut RandomState) -> Result<(), EnvError> {
        Ok(())
    }

    fn initialize_episode(&mut self, _ctx: &mut Context) -> Result<(), EnvError> {
        Ok(())
    }

    /// Translates the action into controls.
    fn before_step(&mut self, ctx: &mut Context, action: &[f64]) -> Result<(), EnvError> {
        ctx.physics.set_control(action)?;
        Ok(())
    }

    fn before_substep(&mut self, _ctx: &mut Context, _action: &[f64]) -> Result<(), EnvError> {
        Ok(())
    }

    fn after_substep(&mut self, _ctx: &mut Context) -> Result<(), EnvError> {
        Ok(())
    }

    fn after_step(&mut self, _ctx: &mut Context) -> Result<(), EnvError> {
        Ok(())
    }

    fn get_reward(&mut self, physics: &Physics) -> Result<f64, EnvError>;

    fn get_discount(&mut self, _physics: &Physics) -> f64 {
        1.0
    }

    fn should_terminate_episode(&mut self, _physics: &Physics) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct EnvConfig {
    pub seed: u64,
    /// Episode length in seconds of simulated time.
    pub time_limit: f64,
    /// Emit buffers of size 1 without their leading axis.
    pub strip_singleton_buffer_dim: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            seed: 0,
            time_limit: f64::INFINITY,
            strip_singleton_buffer_dim: true,
        }
    }
}

pub struct ComposerEnv<T: Task> {
    task: T,
    entities: EntityTree,
    physics: Physics,
    rng: RandomState,
    n_sub: usize,
    max_steps: Option<u64>,
    channels: Vec<Channel>,
    substep: u64,
    steps: u64,
    needs_reset: bool,
    compiled_revision: u64,
}

fn annotate(callback: &'static str, owner: &str, r: Result<(), EnvError>) -> Result<(), EnvError> {
    r.map_err(|e| EnvError::Callback {
        callback,
        owner: format!("task '{owner}'"),
        source: Box::new(e),
    })
}

impl<T: Task> ComposerEnv<T> {
    pub fn new(mut task: T, mut entities: EntityTree, config: EnvConfig) -> Result<Self, EnvError> {
        let physics = Physics::from_model(entities.model())?;
        let h = physics.timestep();
        let ct = task.control_timestep().unwrap_or(h);
        let n_sub = (ct / h).round() as usize;
        if n_sub == 0 || ((n_sub as f64) * h - ct).abs() > 1e-9 * ct.max(1.0) {
            return Err(EnvError::Invalid(format!(
                "control timestep {ct} is not a multiple of the physics timestep {h}"
            )));
        }
        let max_steps = config
            .time_limit
            .is_finite()
            .then(|| (config.time_limit / ct - 1e-9).ceil().max(1.0) as u64);
        let mut channels = Vec::new();
        let mut all = task.observables();
        all.extend(entities.take_observables());
        for (key, obs) in all {
            if channels.iter().any(|c: &Channel| c.key == key) {
                return Err(EnvError::Invalid(format!("duplicate observable '{key}'")));
            }
            if obs.enabled {
                channels.push(Channel::new(key, obs, &physics, config.strip_singleton_buffer_dim)?);
            }
        }
        let compiled_revision = entities.model().revision();
        Ok(ComposerEnv {
            task,
            entities,
            physics,
            rng: RandomState::seed_from_u64(config.seed),
            n_sub,
            max_steps,
            channels,
            substep: 0,
            steps: 0,
            needs_reset: true,
            compiled_revision,
        })
    }

    pub fn task(&self) -> &T {
        &self.task
    }

    pub fn task_mut(&mut self) -> &mut T {
        &mut self.task
    }

    pub fn entities(&self) -> &EntityTree {
        &self.entities
    }

    pub fn random_state(&mut self) -> &mut RandomState {
        &mut self.rng
    }

    pub fn n_substeps(&self) -> usize {
        self.n_sub
    }

    pub fn control_timestep(&self) -> f64 {
        self.n_sub as f64 * self.physics.timestep()
    }

    /// Control steps taken in the current episode.
    pub fn episode_steps(&self) -> u64 {
        self.steps
    }

    fn observation(&mut self) -> Observation {
        let now = self.substep;
        self.channels
            .iter_mut()
            .map(|c| (c.key.clone(), c.output(now)))
            .collect()
    }

    fn observe(&mut self, s: u64) -> Result<(), EnvError> {
        for c in &mut self.channels {
            c.observe(s, &self.physics, &mut self.rng)?;
        }
        Ok(())
    }

    fn run_step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        let end = self.substep + self.n_sub as u64;
        for c in &mut self.channels {
            c.prepare(end, &mut self.rng);
        }
        let name = self.task.name().to_string();
        let Self {
            task,
            entities,
            physics,
            rng,
            ..
        } = self;
        let mut ctx = Context {
            physics,
            entities,
            rng,
        };
        annotate("before_step", &name, task.before_step(&mut ctx, action))?;
        ctx.entities.each("before_step", |e| e.before_step(ctx.physics, ctx.rng))?;
        for k in 1..=self.n_sub {
            let mut ctx = Context {
                physics: &mut self.physics,
                entities: &mut self.entities,
                rng: &mut self.rng,
            };
            annotate("before_substep", &name, self.task.before_substep(&mut ctx, action))?;
            ctx.entities
                .each("before_substep", |e| e.before_substep(ctx.physics, ctx.rng))?;
            ctx.physics.step(1)?;
            annotate("after_substep", &name, self.task.after_substep(&mut ctx))?;
            ctx.entities
                .each("after_substep", |e| e.after_substep(ctx.physics, ctx.rng))?;
            self.substep += 1;
            if k < self.n_sub {
                self.observe(self.substep)?;
            }
        }
        let mut ctx = Context {
            physics: &mut self.physics,
            entities: &mut self.entities,
            rng: &mut self.rng,
        };
        annotate("after_step", &name, self.task.after_step(&mut ctx))?;
        ctx.entities.each("after_step", |e| e.after_step(ctx.physics, ctx.rng))?;
        self.observe(end)?;
        let observation = self.observation();
        let reward = self.task.get_reward(&self.physics)?;
        let discount = self.task.get_discount(&self.physics);
        let terminated = self.task.should_terminate_episode(&self.physics);
        self.steps += 1;
        let timed_out = self.max_steps.is_some_and(|n| self.steps >= n);
        Ok(if terminated || timed_out {
            self.needs_reset = true;
            TimeStep::termination(reward, discount, observation)
        } else {
            TimeStep::transition(reward, discount, observation)
        })
    }
}

impl<T: Task> Environment for ComposerEnv<T> {
    fn reset(&mut self) -> Result<TimeStep, EnvError> {
        self.needs_reset = true;
        let name = self.task.name().to_string();
        annotate(
            "initialize_episode_mjcf",
            &name,
            self.task.initialize_episode_mjcf(&mut self.entities, &mut self.rng),
        )?;
        self.entities.each_mjcf(&mut self.rng)?;
        let revision = self.entities.model().revision();
        if revision != self.compiled_revision {
            self.physics = Physics::from_model(self.entities.model())?;
            self.compiled_revision = revision;
        }
        let Self {
            task,
            entities,
            physics,
            rng,
            ..
        } = self;
        physics.reset_context(|p| {
            let mut ctx = Context {
                physics: p,
                entities,
                rng,
            };
            annotate("initialize_episode", &name, task.initialize_episode(&mut ctx))?;
            ctx.entities
                .each("initialize_episode", |e| e.initialize_episode(ctx.physics, ctx.rng))
        })?;
        self.substep = 0;
        self.steps = 0;
        for c in &mut self.channels {
            c.reset(&self.physics, &mut self.rng)?;
        }
        let observation = self.observation();
        self.needs_reset = false;
        Ok(TimeStep::first(observation))
    }

    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        if self.needs_reset {
            return self.reset();
        }
        // a rejected action leaves the episode intact
        self.task.action_spec(&self.physics).validate_flat(action)?;
        let r = self.run_step(action);
        if r.is_err() {
            self.needs_reset = true;
        }
        r
    }

    fn action_spec(&self) -> ArraySpec {
        self.task.action_spec(&self.physics)
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        self.channels.iter().map(|c| (c.key.clone(), c.spec())).collect()
    }

    fn physics(&self) -> Option<&Physics> {
        Some(&self.physics)
    }

    fn physics_mut(&mut self) -> Option<&mut Physics> {
        Some(&mut self.physics)
    }
}
