use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use ctrlforge::rlcore::Environment;
use ctrlforge::suite::{self, LoadOptions};

use crate::policy::{Policy, PolicyKind};

/// Outcome of `ctrlforge run`.
///
/// JSON schema (all keys always present):
/// `task` string, `policy` string, `seed` integer, `episodes` integer,
/// `returns` array of numbers, `lengths` array of integers (control steps),
/// `final_discounts` array of numbers, `total_steps` integer,
/// `steps_per_sec` number. Everything except `steps_per_sec` is a function
/// of the arguments alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub returns: Vec<f64>,
    pub lengths: Vec<u64>,
    pub final_discounts: Vec<f64>,
    pub total_steps: u64,
    pub steps_per_sec: f64,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} policy={} seed={} episodes={}\n",
            self.task, self.policy, self.seed, self.episodes
        );
        for (i, ((r, n), g)) in self
            .returns
            .iter()
            .zip(&self.lengths)
            .zip(&self.final_discounts)
            .enumerate()
        {
            out += &format!("  episode {i}: return {r:.4} over {n} steps, final discount {g}\n");
        }
        out += &format!("{} steps at {:.0} steps/s", self.total_steps, self.steps_per_sec);
        out
    }
}

fn rate(steps: u64, start: Instant) -> f64 {
    steps as f64 / start.elapsed().as_secs_f64().max(1e-9)
}

pub fn run(task: &str, episodes: usize, seed: u64, policy: PolicyKind) -> Result<RunReport> {
    let mut env = suite::load_id(task, &LoadOptions::seed(seed))?;
    let mut pi = Policy::new(policy, &env, seed)?;
    let mut report = RunReport {
        task: task.to_string(),
        policy: policy.to_string(),
        seed,
        episodes,
        returns: Vec::new(),
        lengths: Vec::new(),
        final_discounts: Vec::new(),
        total_steps: 0,
        steps_per_sec: 0.0,
    };
    let start = Instant::now();
    for _ in 0..episodes {
        let mut ts = env.reset()?;
        let (mut ret, mut len) = (0.0, 0);
        while !ts.is_last() {
            let a = pi.act(&env, &ts)?;
            ts = env.step(&a)?;
            ret += ts.reward.unwrap_or(0.0);
            len += 1;
        }
        report.returns.push(ret);
        report.lengths.push(len);
        report.final_discounts.push(ts.discount.unwrap_or(1.0));
        report.total_steps += len;
    }
    report.steps_per_sec = rate(report.total_steps, start);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub task: String,
    pub steps: u64,
    pub seconds: f64,
    pub steps_per_sec: f64,
}

/// Runs exactly `steps` control steps under the random policy, starting new
/// episodes as needed.
pub fn bench(task: &str, steps: u64, seed: u64) -> Result<BenchReport> {
    let mut env = suite::load_id(task, &LoadOptions::seed(seed))?;
    let mut pi = Policy::new(PolicyKind::Random, &env, seed)?;
    let start = Instant::now();
    let mut ts = env.reset()?;
    for _ in 0..steps {
        if ts.is_last() {
            ts = env.reset()?;
        }
        let a = pi.act(&env, &ts)?;
        ts = env.step(&a)?;
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(BenchReport {
        task: task.to_string(),
        steps,
        seconds,
        steps_per_sec: rate(steps, start),
    })
}
