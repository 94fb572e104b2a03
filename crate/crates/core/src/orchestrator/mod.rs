//! Round loop for PAGE and the FedAvg/FedProx baselines, stopping rules,
//! replication across seeds and checkpoints.

mod checkpoint;
mod config;
mod equilibrium;
mod fl_game;
mod learner;
mod replicate;
mod sim;

pub use checkpoint::CHECKPOINT_FORMAT;
pub use config::{
    Algorithm, DataConfig, ExperimentConfig, FreezeConfig, ModelConfig, StopConfig, Weighting, SCHEMA_VERSION,
};
pub use equilibrium::{detect_equilibrium, detect_equilibrium_series, window_settled};
pub use fl_game::FlGame;
pub use learner::{Learner, Mode};
pub use replicate::{replicate_seeds, run_replicated, run_replicated_with, ReplicatedSummary, RunSummary, Stat};
pub use sim::{
    agent_configs, build_data, run, run_fedavg, run_fedprox, run_page, RoundRecord, RunOutcome, Simulation,
    StageUtilities,
};
