//! Federated learning simulator in which a server-side actor-critic agent
//! picks aggregation weights and per-client agents pick local epochs and
//! learning rates, with FedAvg and FedProx baselines for comparison.

pub mod binfmt;
pub mod data;
pub mod ddpg;
pub mod error;
pub mod flcore;
pub mod game;
pub mod numerics;
pub mod orchestrator;
pub mod report;
pub mod rng;

pub use data::{Dataset, PartitionConfig, PartitionScheme, SyntheticConfig};
pub use ddpg::{ActionSpace, DdpgAgent, DdpgConfig, DdpgHyper, Transition};
pub use error::{Error, Result};
pub use flcore::{AggregationWeights, Evaluation, LocalTrainSpec};
pub use numerics::{Gradient, MlpSpec, ParamVector};
