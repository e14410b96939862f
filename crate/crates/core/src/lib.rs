//! Physics-based control environments: model composition, a rigid-body
//! engine, a reinforcement-learning environment interface, a task
//! composition layer and a suite of benchmark domains.

pub mod modeldom;
pub mod engine;
pub mod physics;
pub mod rlcore;
pub mod composer;
pub mod suite;
