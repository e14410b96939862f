//! Task composition: entities with lifecycle callbacks, observables with
//! buffering, delays and noise, and seeded model/physics randomisation.
//!
//! Reset runs `initialize_episode_mjcf` (task, then entities depth first),
//! recompiles if the model changed, and runs `initialize_episode` inside a
//! physics reset context. A step runs `before_step`, then per substep
//! `before_substep`, a physics step and `after_substep`, then `after_step`,
//! and finally assembles observations, reward, discount and termination.

mod entity;
mod environment;
mod observable;
pub mod variation;
mod variator;

pub use entity::{AsAny, Entity, EntityId, EntityTree};
pub use environment::{actuator_spec, ComposerEnv, Context, EnvConfig, Task};
pub use observable::{Aggregator, Observable, Schedule};
pub use variation::{evaluate as evaluate_structure, Structure, Variation, VariationError};
pub use variator::{MjcfVariator, PhysicsVariator};

/// Random number generator shared by everything random in an environment.
pub type RandomState = rand_chacha::ChaCha8Rng;
