//! Single-state continuous bandit with reward `-(a - optimum)^2`, used to
//! sanity-check that an agent actually climbs its critic.

use super::{ActionSpace, DdpgAgent, DdpgConfig, DdpgHyper, Transition};
use crate::error::Result;

pub const BANDIT_OPTIMUM: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticBandit {
    pub optimum: f64,
}

impl Default for QuadraticBandit {
    fn default() -> Self {
        Self {
            optimum: BANDIT_OPTIMUM,
        }
    }
}

impl QuadraticBandit {
    pub const STATE: [f64; 1] = [0.0];

    pub fn reward(&self, action: f64) -> f64 {
        -(action - self.optimum).powi(2)
    }

    /// Agent settings that solve the bandit on the unit box.
    pub fn agent_config() -> DdpgConfig {
        let hyper = DdpgHyper {
            hidden_layers: vec![64, 64],
            actor_lr: 1e-3,
            critic_lr: 1e-1,
            target_rate: 0.05,
            discount: 0.0,
            buffer_capacity: 500,
            batch_size: 64,
            noise_std0: 0.6,
            noise_decay: 0.9995,
            warmup_steps: 200,
            reward_clip: 100.0,
            ..DdpgHyper::default()
        };
        DdpgConfig::new(1, 1, ActionSpace::Box { low: 0.0, high: 1.0 }, hyper).expect("valid bandit config")
    }

    /// Run `steps` interaction/learning steps and return the trained agent.
    pub fn train(&self, cfg: DdpgConfig, seed: u64, steps: usize) -> Result<DdpgAgent> {
        let mut agent = DdpgAgent::new(cfg, seed);
        for _ in 0..steps {
            let a = agent.act(&Self::STATE, true)?;
            let r = self.reward(a[0]);
            agent.store(Transition {
                state: Self::STATE.to_vec(),
                action: a,
                reward: r,
                next_state: Self::STATE.to_vec(),
            })?;
            agent.learn_step()?;
            agent.decay_noise();
        }
        Ok(agent)
    }
}
