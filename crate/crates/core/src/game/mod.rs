//! Server and client games on top of the learning agents: rewards, action
//! decoding, discounted payoffs and an empirical equilibrium check.

mod action;
mod fse;
mod payoff;
mod reward;
mod state;

pub use action::{client_action_decode, client_action_from_unit, client_unit_for, server_action_to_weights, ActionBounds};
pub use fse::{
    fse_diagnostic, perturb, BanditGame, Deviation, FseConfig, FseReport, ProbeResult, StageGame, CERT_MAX_FRACTION,
    CERT_MAX_RELATIVE_GAIN,
};
pub use payoff::{accumulate_payoff, discounted_sum, DiscountConvention, PayoffLedger};
pub use reward::{client_reward, server_reward, utility, LOSS_FLOOR};
pub use state::{ClientState, GameCondition, ServerState};
