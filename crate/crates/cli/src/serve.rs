//! Websocket backend for the browser viewer.
//!
//! One simulation thread steps the environment in real time (scaled by
//! `speed`) and publishes each frame into a latest-wins slot. One handler
//! thread per connection forwards new frames and turns client messages into
//! commands on a queue that the simulation drains before every tick, so a
//! slow client drops frames instead of slowing the simulation.
//!
//! Messages are JSON objects `{"v": 1, "type": ..., ...}`.
//!
//! Server to client:
//! - `hello`: `role` (`controller` or `observer`), `task`,
//!   `control_timestep`, `nq`, `nv`, `nu`, `bodies` (`id`, `name`,
//!   `parent`, `mass`), `geoms` (`id`, `name`, `body`, `kind`, `size`),
//!   `camera` (`fovy`, `azimuth`, `elevation`, `lookat`, `distance`),
//!   `perturb_gain`.
//! - `frame`: `time`, `step`, `episode`, `reward` (null on the first step of
//!   an episode), `paused`, `geoms` (`pos`, `quat` as w,x,y,z, `kind`,
//!   `size`, `rgba`), `qpos`, `qvel`.
//! - `error`: `message`.
//!
//! Client to server (only the first connected client controls):
//! - `pause`, `resume`, `step` (one control step, while paused), `reset`.
//! - `perturb`: `body`, either `force` (N, world frame) or `drag` (m, scaled
//!   by body mass and [`PERTURB_GAIN`]), optional `point` (world frame,
//!   defaults to the centre of mass) and `substeps`. The wrench is held for
//!   whole control steps, so `substeps` is rounded up to a multiple of the
//!   control step. Perturbations sent while paused wait for the next step.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde_json::{json, Value};
use tungstenite::{Message, WebSocket};

use ctrlforge::engine::GeomType;
use ctrlforge::modeldom::Namespace;
use ctrlforge::physics::Physics;
use ctrlforge::rlcore::{Environment, TimeStep};
use ctrlforge::suite::{self, LoadOptions, SuiteEnv};

use crate::policy::{Policy, PolicyKind};

pub const PROTOCOL_VERSION: u64 = 1;

/// Acceleration, in m/s² per metre of drag, given to a dragged body.
pub const PERTURB_GAIN: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub task: String,
    pub seed: u64,
    pub policy: PolicyKind,
    pub visualize_reward: bool,
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
}

impl ServeConfig {
    pub fn new(task: &str) -> ServeConfig {
        ServeConfig {
            task: task.to_string(),
            seed: 0,
            policy: PolicyKind::Zero,
            visualize_reward: true,
            speed: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Perturb {
    pub body: usize,
    pub force: [f64; 3],
    pub point: Option<[f64; 3]>,
    pub substeps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Pause,
    Resume,
    Step,
    Reset,
    Perturb(Perturb),
}

/// What a handler needs to validate messages without touching the simulation.
struct Summary {
    masses: Vec<f64>,
    hello: Value,
}

#[derive(Default)]
struct Latest {
    seq: u64,
    text: Arc<String>,
}

type Slot = Arc<(Mutex<Latest>, Condvar)>;

pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl Server {
    /// Loads the task and starts listening on `listen` (use port 0 for any).
    pub fn start(listen: &str, config: ServeConfig) -> Result<Server> {
        if !(config.speed > 0.0 && config.speed.is_finite()) {
            bail!("speed must be positive");
        }
        let options = LoadOptions {
            visualize_reward: config.visualize_reward,
            ..LoadOptions::seed(config.seed)
        };
        let mut env = suite::load_id(&config.task, &options)?;
        let policy = Policy::new(config.policy, &env, config.seed)?;
        if config.policy == PolicyKind::LqrOptimal {
            bail!("serve supports the random and zero policies");
        }
        let first = env.reset()?;
        let summary = Arc::new(summarize(&config.task, &mut env)?);

        let listener = TcpListener::bind(listen).with_context(|| format!("binding {listen}"))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let slot: Slot = Arc::default();
        let (tx, rx) = mpsc::channel();

        let sim = Sim {
            env,
            policy,
            ts: first,
            step: 0,
            episode: 0,
            paused: false,
            step_once: 0,
            pending: Vec::new(),
            active: Vec::new(),
        };
        let mut threads = Vec::new();
        {
            let (stop, slot) = (stop.clone(), slot.clone());
            let speed = config.speed;
            threads.push(thread::spawn(move || sim.run(rx, slot, stop, speed)));
        }
        {
            let stop = stop.clone();
            threads.push(thread::spawn(move || accept(listener, tx, slot, summary, stop)));
        }
        Ok(Server { addr, stop, threads })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the simulation thread exits.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn kind_name(k: GeomType) -> &'static str {
    match k {
        GeomType::Plane => "plane",
        GeomType::Sphere => "sphere",
        GeomType::Capsule => "capsule",
        GeomType::Cylinder => "cylinder",
        GeomType::Box => "box",
        GeomType::Ellipsoid => "ellipsoid",
    }
}

fn summarize(task: &str, env: &mut SuiteEnv) -> Result<Summary> {
    let dt = env.control_timestep();
    let p = env.physics_mut().expect("suite envs have physics");
    p.ensure_position()?;
    let m = p.model();
    let d = p.data();
    let bodies: Vec<Value> = m
        .bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            json!({"id": i, "name": m.id2name(Namespace::Body, i), "parent": b.parent, "mass": b.mass})
        })
        .collect();
    let geoms: Vec<Value> = m
        .geoms
        .iter()
        .enumerate()
        .map(|(i, g)| {
            json!({"id": i, "name": m.id2name(Namespace::Geom, i), "body": g.body,
                   "kind": kind_name(g.kind), "size": g.size})
        })
        .collect();
    // frame the non-plane geoms as they stand at the start
    let pts: Vec<Vector3<f64>> = m
        .geoms
        .iter()
        .zip(&d.geom_xpos)
        .filter(|(g, _)| g.kind != GeomType::Plane)
        .map(|(_, x)| *x)
        .collect();
    let centre = if pts.is_empty() {
        Vector3::zeros()
    } else {
        pts.iter().sum::<Vector3<f64>>() / pts.len() as f64
    };
    let extent = pts.iter().map(|x| (x - centre).norm()).fold(0.5, f64::max);
    let hello = json!({
        "v": PROTOCOL_VERSION,
        "type": "hello",
        "task": task,
        "control_timestep": dt,
        "nq": m.nq(),
        "nv": m.nv(),
        "nu": m.nu(),
        "bodies": bodies,
        "geoms": geoms,
        "camera": {"fovy": 45.0, "azimuth": 90.0, "elevation": -30.0,
                   "lookat": [centre.x, centre.y, centre.z], "distance": 3.0 * extent},
        "perturb_gain": PERTURB_GAIN,
    });
    Ok(Summary {
        masses: m.bodies.iter().map(|b| b.mass).collect(),
        hello,
    })
}

pub fn frame_message(physics: &mut Physics, step: u64, episode: u64, reward: Option<f64>, paused: bool) -> Result<Value> {
    physics.ensure_position()?;
    let m = physics.model();
    let d = physics.data();
    let geoms: Vec<Value> = m
        .geoms
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let p = d.geom_xpos[i];
            let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(d.geom_xmat[i]));
            json!({"pos": [p.x, p.y, p.z], "quat": [q.w, q.i, q.j, q.k],
                   "kind": kind_name(g.kind), "size": g.size, "rgba": g.rgba})
        })
        .collect();
    Ok(json!({
        "v": PROTOCOL_VERSION,
        "type": "frame",
        "time": d.time,
        "step": step,
        "episode": episode,
        "reward": reward,
        "paused": paused,
        "geoms": geoms,
        "qpos": d.qpos,
        "qvel": d.qvel,
    }))
}

struct Sim {
    env: SuiteEnv,
    policy: Policy,
    ts: TimeStep,
    step: u64,
    episode: u64,
    paused: bool,
    step_once: u32,
    pending: Vec<Perturb>,
    /// Perturbations being applied, with their remaining control steps.
    active: Vec<(Perturb, u64)>,
}

impl Sim {
    fn run(mut self, rx: Receiver<Command>, slot: Slot, stop: Arc<AtomicBool>, speed: f64) {
        let period = Duration::from_secs_f64(self.env.control_timestep() / speed);
        if let Err(e) = self.publish(&slot) {
            eprintln!("error: {e:#}");
            return;
        }
        let mut next = Instant::now();
        while !stop.load(Ordering::SeqCst) {
            let mut fresh = false;
            while let Ok(cmd) = rx.try_recv() {
                fresh |= cmd == Command::Reset;
                self.apply(cmd);
            }
            // a reset gets a tick of its own so its first frame is seen
            let r = if fresh { Ok(()) } else { self.tick() }.and_then(|_| self.publish(&slot));
            if let Err(e) = r {
                eprintln!("error: {e:#}");
                stop.store(true, Ordering::SeqCst);
                break;
            }
            next += period;
            let now = Instant::now();
            if next > now {
                thread::sleep(next - now);
            } else {
                next = now;
            }
        }
        let (lock, cv) = &*slot;
        drop(lock.lock());
        cv.notify_all();
    }

    fn apply(&mut self, cmd: Command) {
        match cmd {
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
            Command::Step => {
                if self.paused {
                    self.step_once += 1;
                }
            }
            Command::Reset => {
                self.active.clear();
                self.pending.clear();
                self.step_once = 0;
                match self.env.reset() {
                    Ok(ts) => {
                        self.ts = ts;
                        self.step = 0;
                        self.episode += 1;
                    }
                    Err(e) => eprintln!("error: reset failed: {e}"),
                }
            }
            Command::Perturb(p) => self.pending.push(p),
        }
    }

    fn tick(&mut self) -> Result<()> {
        if self.paused {
            if self.step_once == 0 {
                return Ok(());
            }
            self.step_once -= 1;
        }
        if self.ts.is_last() {
            self.active.clear();
            self.ts = self.env.reset()?;
            self.step = 0;
            self.episode += 1;
            return Ok(());
        }
        let n_sub = self.env.n_substeps() as u64;
        for p in self.pending.drain(..) {
            let steps = p.substeps.div_ceil(n_sub).max(1);
            self.active.push((p, steps));
        }
        self.set_wrenches()?;
        let a = self.policy.act(&self.env, &self.ts)?;
        self.ts = self.env.step(&a)?;
        self.step += 1;
        for (_, left) in &mut self.active {
            *left -= 1;
        }
        self.active.retain(|(_, left)| *left > 0);
        self.set_wrenches()?;
        Ok(())
    }

    /// Writes the summed wrench of the active perturbations on every body.
    fn set_wrenches(&mut self) -> Result<()> {
        let physics = self.env.physics_mut().expect("suite envs have physics");
        physics.ensure_position()?;
        let nbody = physics.model().nbody();
        let mut w = vec![[0.0; 6]; nbody];
        for (p, _) in &self.active {
            let com = physics.data().xipos[p.body];
            let f = Vector3::from(p.force);
            let arm = p.point.map_or(Vector3::zeros(), |x| Vector3::from(x) - com);
            let t = arm.cross(&f);
            for (k, v) in [f.x, f.y, f.z, t.x, t.y, t.z].into_iter().enumerate() {
                w[p.body][k] += v;
            }
        }
        for (b, wrench) in w.into_iter().enumerate().skip(1) {
            if physics.data().xfrc_applied[b] != wrench {
                physics.set_body_wrench(b, wrench)?;
            }
        }
        Ok(())
    }

    fn publish(&mut self, slot: &Slot) -> Result<()> {
        let (step, episode, reward, paused) = (self.step, self.episode, self.ts.reward, self.paused);
        let physics = self.env.physics_mut().expect("suite envs have physics");
        let text = frame_message(physics, step, episode, reward, paused)?.to_string();
        let (lock, cv) = &**slot;
        let mut latest = lock.lock().unwrap();
        latest.seq += 1;
        latest.text = Arc::new(text);
        cv.notify_all();
        Ok(())
    }
}

fn accept(listener: TcpListener, tx: Sender<Command>, slot: Slot, summary: Arc<Summary>, stop: Arc<AtomicBool>) {
    let controller = Arc::new(AtomicU64::new(0));
    let mut next_id = 1u64;
    let mut handlers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let id = next_id;
                next_id += 1;
                let (tx, slot, summary, stop, controller) =
                    (tx.clone(), slot.clone(), summary.clone(), stop.clone(), controller.clone());
                handlers.push(thread::spawn(move || {
                    let _ = handle(stream, id, tx, slot, summary, stop, &controller);
                    let _ = controller.compare_exchange(id, 0, Ordering::SeqCst, Ordering::SeqCst);
                }));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                eprintln!("error: accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
    for h in handlers {
        let _ = h.join();
    }
}

fn would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io)
        if matches!(io.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut))
}

fn handle(
    stream: TcpStream,
    id: u64,
    tx: Sender<Command>,
    slot: Slot,
    summary: Arc<Summary>,
    stop: Arc<AtomicBool>,
    controller: &AtomicU64,
) -> Result<()> {
    stream.set_nonblocking(false)?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| anyhow!("handshake: {e}"))?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(2)))?;
    let is_controller = controller
        .compare_exchange(0, id, Ordering::SeqCst, Ordering::SeqCst)
        .is_ok();
    let mut hello = summary.hello.clone();
    hello["role"] = json!(if is_controller { "controller" } else { "observer" });
    ws.send(Message::Text(hello.to_string()))?;
    let mut seen = 0;
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let reply = if !is_controller {
                    Err(anyhow!("observers cannot control the simulation"))
                } else {
                    parse_command(&text, &summary.masses).map(|cmd| {
                        // the simulation thread only goes away on shutdown
                        let _ = tx.send(cmd);
                    })
                };
                if let Err(e) = reply {
                    let msg = json!({"v": PROTOCOL_VERSION, "type": "error", "message": e.to_string()});
                    ws.send(Message::Text(msg.to_string()))?;
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(e) if would_block(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => return Err(e.into()),
        }
        let frame = {
            let (lock, cv) = &*slot;
            let latest = lock.lock().unwrap();
            let (latest, _) = cv
                .wait_timeout_while(latest, Duration::from_millis(5), |l| l.seq == seen)
                .unwrap();
            (latest.seq != seen).then(|| {
                seen = latest.seq;
                latest.text.clone()
            })
        };
        if let Some(text) = frame {
            ws.send(Message::Text(text.as_ref().clone()))?;
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}

fn vec3(v: &Value, key: &str) -> Result<Option<[f64; 3]>> {
    let Some(x) = v.get(key) else { return Ok(None) };
    let arr = x
        .as_array()
        .filter(|a| a.len() == 3)
        .ok_or_else(|| anyhow!("'{key}' must be an array of three numbers"))?;
    let mut out = [0.0; 3];
    for (o, e) in out.iter_mut().zip(arr) {
        *o = e
            .as_f64()
            .filter(|f| f.is_finite())
            .ok_or_else(|| anyhow!("'{key}' must hold finite numbers"))?;
    }
    Ok(Some(out))
}

/// Parses a client message. `masses` are the body masses, world first.
pub fn parse_command(text: &str, masses: &[f64]) -> Result<Command> {
    let v: Value = serde_json::from_str(text).context("message is not JSON")?;
    match v.get("v").and_then(Value::as_u64) {
        Some(PROTOCOL_VERSION) => {}
        other => bail!("unsupported protocol version {other:?}, expected {PROTOCOL_VERSION}"),
    }
    let kind = v.get("type").and_then(Value::as_str).unwrap_or("");
    Ok(match kind {
        "pause" => Command::Pause,
        "resume" => Command::Resume,
        "step" => Command::Step,
        "reset" => Command::Reset,
        "perturb" => {
            let body = v
                .get("body")
                .and_then(Value::as_u64)
                .ok_or_else(|| anyhow!("perturb needs an integer 'body'"))? as usize;
            if body == 0 || body >= masses.len() {
                bail!("body {body} is not a movable body (1..{})", masses.len());
            }
            let force = match (vec3(&v, "force")?, vec3(&v, "drag")?) {
                (Some(f), _) => f,
                (None, Some(d)) => d.map(|x| x * masses[body] * PERTURB_GAIN),
                (None, None) => bail!("perturb needs 'force' or 'drag'"),
            };
            let substeps = match v.get("substeps") {
                None => 1,
                Some(s) => s
                    .as_u64()
                    .filter(|&s| s > 0)
                    .ok_or_else(|| anyhow!("'substeps' must be a positive integer"))?,
            };
            Command::Perturb(Perturb {
                body,
                force,
                point: vec3(&v, "point")?,
                substeps,
            })
        }
        "" => bail!("message has no 'type'"),
        other => bail!("unknown message type '{other}'"),
    })
}
