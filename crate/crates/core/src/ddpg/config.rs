use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Activation, MlpSpec, OutputHead};

/// Which main-network parameters feed the target soft update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetSync {
    /// `θ' <- β θ(t-1) + (1-β) θ'`: mains as they were before this step.
    #[default]
    PreUpdate,
    /// `θ' <- β θ(t) + (1-β) θ'`: mains after this step's gradient updates.
    PostUpdate,
}

/// Feasible action set and how the actor's raw output is mapped into it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    /// Softmax onto the open probability simplex.
    Simplex,
    /// `tanh` squashing, then affine onto `[low, high]` in every coordinate.
    Box { low: f64, high: f64 },
}

/// Learning hyper-parameters shared by every agent of a role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgHyper {
    pub hidden_layers: Vec<usize>,
    pub hidden_activation: Activation,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Target-network update rate β.
    pub target_rate: f64,
    /// Discount γ.
    pub discount: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub noise_std0: f64,
    pub noise_decay: f64,
    pub warmup_steps: u64,
    /// Rewards are clipped to `[-reward_clip, reward_clip]` before storage.
    pub reward_clip: f64,
    pub target_sync: TargetSync,
}

impl Default for DdpgHyper {
    fn default() -> Self {
        Self {
            hidden_layers: vec![64, 64],
            hidden_activation: Activation::Tanh,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            target_rate: 0.01,
            discount: 0.99,
            buffer_capacity: 10_000,
            batch_size: 64,
            noise_std0: 0.2,
            noise_decay: 0.99,
            warmup_steps: 1,
            reward_clip: 100.0,
            target_sync: TargetSync::PreUpdate,
        }
    }
}

impl DdpgHyper {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be finite and > 0"))
            }
        };
        if self.hidden_layers.contains(&0) {
            return Err(Error::config("hidden_layers", "sizes must be >= 1"));
        }
        positive("actor_lr", self.actor_lr)?;
        positive("critic_lr", self.critic_lr)?;
        positive("reward_clip", self.reward_clip)?;
        if !(0.0..=1.0).contains(&self.target_rate) {
            return Err(Error::config("target_rate", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("discount", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(Error::config("batch_size", "must be in 1..=buffer_capacity"));
        }
        if !(self.noise_std0 >= 0.0 && self.noise_std0.is_finite()) {
            return Err(Error::config("noise_std0", "must be finite and >= 0"));
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return Err(Error::config("noise_decay", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Complete agent configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdpgConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_space: ActionSpace,
    pub hyper: DdpgHyper,
}

impl DdpgConfig {
    pub fn new(state_dim: usize, action_dim: usize, action_space: ActionSpace, hyper: DdpgHyper) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::Structure("state and action dims must be >= 1".into()));
        }
        if let ActionSpace::Box { low, high } = action_space {
            if !(low < high) || !low.is_finite() || !high.is_finite() {
                return Err(Error::Structure(format!("empty action box [{low}, {high}]")));
            }
        }
        hyper.validate()?;
        Ok(Self {
            state_dim,
            action_dim,
            action_space,
            hyper,
        })
    }

    pub fn actor_spec(&self) -> MlpSpec {
        let mut sizes = vec![self.state_dim];
        sizes.extend(&self.hyper.hidden_layers);
        sizes.push(self.action_dim);
        let head = match self.action_space {
            ActionSpace::Simplex => OutputHead::SimplexSoftmax,
            ActionSpace::Box { .. } => OutputHead::BoundedTanh,
        };
        MlpSpec::new(sizes, self.hyper.hidden_activation, head).expect("validated dims")
    }

    /// Critic input is the state concatenated with the action.
    pub fn critic_spec(&self) -> MlpSpec {
        let mut sizes = vec![self.state_dim + self.action_dim];
        sizes.extend(&self.hyper.hidden_layers);
        sizes.push(1);
        MlpSpec::new(sizes, self.hyper.hidden_activation, OutputHead::Identity).expect("validated dims")
    }
}
