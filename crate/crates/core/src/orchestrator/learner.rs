use crate::ddpg::{DdpgAgent, Transition};
use crate::error::Result;
use crate::game::{perturb, Deviation};

/// How a round treats the agents.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    /// Store the previous transition, learn, then act with exploration.
    Learn,
    /// Follow the frozen greedy policies, optionally with one player deviating.
    Greedy(Option<Deviation<'a>>),
}

#[derive(Clone, Debug)]
struct Pending {
    state: Vec<f64>,
    action: Vec<f64>,
    reward: f64,
}

/// An agent plus the transition still waiting for its next state.
#[derive(Clone, Debug)]
pub struct Learner {
    pub agent: DdpgAgent,
    pending: Option<Pending>,
}

impl Learner {
    pub fn new(agent: DdpgAgent) -> Self {
        Self { agent, pending: None }
    }

    /// Observe `state` and return this round's action.
    pub fn decide(&mut self, state: &[f64], mode: Mode<'_>, player: usize) -> Result<Vec<f64>> {
        match mode {
            Mode::Learn => {
                if let Some(p) = self.pending.take() {
                    self.agent.store(Transition {
                        state: p.state,
                        action: p.action,
                        reward: p.reward,
                        next_state: state.to_vec(),
                    })?;
                    self.agent.learn_step()?;
                }
                let action = self.agent.act(state, true)?;
                self.agent.decay_noise();
                Ok(action)
            }
            Mode::Greedy(dev) => {
                let action = self.agent.policy(state)?;
                Ok(match dev {
                    Some(d) if d.player == player => perturb(action, d.delta, |v| self.agent.project(&v)),
                    _ => action,
                })
            }
        }
    }

    /// Keep `(state, action, reward)` until the next state is observed.
    pub fn remember(&mut self, state: Vec<f64>, action: Vec<f64>, reward: f64) {
        self.pending = Some(Pending { state, action, reward });
    }
}
