//! Continuous-action actor-critic agent (deterministic policy gradient with
//! target networks and uniform experience replay).

mod agent;
pub mod bandit;
mod config;
mod replay;

pub use agent::{DdpgAgent, LearnStats};
pub use config::{ActionSpace, DdpgConfig, DdpgHyper, TargetSync};
pub use replay::{ReplayBuffer, Transition};
