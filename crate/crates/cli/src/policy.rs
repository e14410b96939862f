use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctrlforge::rlcore::{Environment, TimeStep};
use ctrlforge::suite::{self, lqr, RiccatiSolution, SuiteEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Random,
    Zero,
    LqrOptimal,
}

impl FromStr for PolicyKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PolicyKind::Random),
            "zero" => Ok(PolicyKind::Zero),
            "lqr-optimal" => Ok(PolicyKind::LqrOptimal),
            _ => Err(anyhow!("unknown policy '{s}', expected random, zero or lqr-optimal")),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Random => "random",
            PolicyKind::Zero => "zero",
            PolicyKind::LqrOptimal => "lqr-optimal",
        })
    }
}

/// Open-loop or linear-feedback controller for a suite task.
pub struct Policy {
    kind: PolicyKind,
    rng: ChaCha8Rng,
    gain: Option<RiccatiSolution>,
}

impl Policy {
    /// The random policy draws from its own stream so that the environment's
    /// randomness is the same whichever policy runs.
    pub fn new(kind: PolicyKind, env: &SuiteEnv, seed: u64) -> Result<Policy> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let gain = match kind {
            PolicyKind::LqrOptimal => {
                let Some(spec) = env.task().lqr_spec() else {
                    bail!("policy lqr-optimal is only defined for lqr tasks");
                };
                Some(spec.solve()?)
            }
            _ => None,
        };
        Ok(Policy { kind, rng, gain })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn act(&mut self, env: &SuiteEnv, ts: &TimeStep) -> Result<Vec<f64>> {
        let spec = env.action_spec();
        Ok(match self.kind {
            PolicyKind::Zero => vec![0.0; spec.size()],
            PolicyKind::Random => suite::random_action(&spec, &mut self.rng),
            PolicyKind::LqrOptimal => {
                let x: DVector<f64> = lqr::state_from_observation(&ts.observation)
                    .ok_or_else(|| anyhow!("observation lacks position/velocity"))?;
                let gain = self.gain.as_ref().expect("gain solved in new");
                gain.control(&x).as_slice().to_vec()
            }
        })
    }
}
