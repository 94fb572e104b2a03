use super::learner::Mode;
use super::sim::Simulation;
use crate::error::{Error, Result};
use crate::game::{Deviation, StageGame};

/// The federated game with frozen greedy policies. Player 0 is the server
/// (deviations perturb its aggregation weights); player `i + 1` is client
/// `i` (deviations perturb its action before decoding, in `[-1, 1]^2`).
#[derive(Clone, Debug)]
pub struct FlGame {
    sim: Simulation,
}

impl FlGame {
    pub fn new(sim: Simulation) -> Result<Self> {
        if !sim.has_agents() {
            return Err(Error::Usage("the game needs trained agents; this run has none".into()));
        }
        Ok(Self { sim })
    }
}

impl StageGame for FlGame {
    fn players(&self) -> usize {
        self.sim.config().num_clients + 1
    }

    fn action_dim(&self, player: usize) -> usize {
        if player == 0 {
            self.sim.config().num_clients
        } else {
            2
        }
    }

    fn stage(&self) -> usize {
        self.sim.rounds_done() + 1
    }

    fn step(&mut self, deviation: Option<Deviation<'_>>) -> Result<Vec<f64>> {
        self.sim.play_round(Mode::Greedy(deviation)).map(|(_, u)| u)
    }
}
