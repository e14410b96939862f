//! Library half of the `ctrlforge` binary. Each subcommand lives in its own
//! module so the integration tests can drive it without spawning a process.

pub mod imaging;
pub mod inspect;
pub mod policy;
pub mod run;
pub mod serve;
pub mod solve;

pub use policy::{Policy, PolicyKind};
pub use run::{bench, run, BenchReport, RunReport};
