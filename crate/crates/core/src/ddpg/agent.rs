use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::config::{ActionSpace, DdpgConfig, DdpgHyper, TargetSync};
use super::replay::{ReplayBuffer, Transition};
use crate::binfmt::{BinReader, BinWriter};
use crate::error::{Error, Result};
use crate::numerics::{mse_loss_and_grad, Activation, Gradient, MlpSpec, OutputHead, ParamVector};
use crate::rng::{SimRng, rng_from};

/// Statistics of one completed learning step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnStats {
    pub critic_loss: f64,
    /// Mean `Q(s, μ(s))` over the batch before the update.
    pub actor_objective: f64,
}

/// Actor-critic agent with target networks and experience replay.
#[derive(Clone, Debug)]
pub struct DdpgAgent {
    cfg: DdpgConfig,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
    actor: ParamVector,
    critic: ParamVector,
    actor_target: ParamVector,
    pub(super) critic_target: ParamVector,
    buffer: ReplayBuffer,
    rng: SimRng,
    seed: u64,
    steps: u64,
    noise_std: f64,
}

impl DdpgAgent {
    /// Fresh agent; targets start as exact copies of the main networks.
    pub fn new(cfg: DdpgConfig, seed: u64) -> Self {
        let actor_spec = cfg.actor_spec();
        let critic_spec = cfg.critic_spec();
        let mut rng = rng_from(seed, &[]);
        let actor = actor_spec.init_params(&mut rng);
        let critic = critic_spec.init_params(&mut rng);
        Self {
            buffer: ReplayBuffer::new(cfg.hyper.buffer_capacity),
            noise_std: cfg.hyper.noise_std0,
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_spec,
            critic_spec,
            cfg,
            rng,
            seed,
            steps: 0,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn actor(&self) -> &ParamVector {
        &self.actor
    }

    pub fn critic(&self) -> &ParamVector {
        &self.critic
    }

    pub fn actor_target(&self) -> &ParamVector {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &ParamVector {
        &self.critic_target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn actor_spec(&self) -> &MlpSpec {
        &self.actor_spec
    }

    pub fn critic_spec(&self) -> &MlpSpec {
        &self.critic_spec
    }

    /// Replace main actor parameters (targets untouched).
    pub fn set_actor(&mut self, params: ParamVector) -> Result<()> {
        if params.len() != self.actor.len() {
            return Err(Error::dim("actor params", self.actor.len(), params.len()));
        }
        self.actor = params;
        Ok(())
    }

    fn check_state(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.cfg.state_dim {
            return Err(Error::dim("agent state", self.cfg.state_dim, s.len()));
        }
        Ok(())
    }

    /// Map a raw (pre-head) actor output into the feasible action set.
    pub fn squash(&self, raw: &[f64]) -> Vec<f64> {
        match self.cfg.action_space {
            ActionSpace::Simplex => OutputHead::SimplexSoftmax.apply(raw),
            ActionSpace::Box { low, high } => raw
                .iter()
                .map(|z| (low + (high - low) * (z.tanh() + 1.0) / 2.0).clamp(low, high))
                .collect(),
        }
    }

    /// Gradient w.r.t. the raw output given a gradient w.r.t. the action.
    fn squash_backprop(&self, raw: &[f64], action: &[f64], grad_action: &[f64]) -> Vec<f64> {
        match self.cfg.action_space {
            ActionSpace::Simplex => OutputHead::SimplexSoftmax.backprop(action, grad_action),
            ActionSpace::Box { low, high } => raw
                .iter()
                .zip(grad_action)
                .map(|(z, g)| {
                    let t = z.tanh();
                    g * (high - low) / 2.0 * (1.0 - t * t)
                })
                .collect(),
        }
    }

    /// Project an arbitrary vector onto the feasible action set.
    pub fn project(&self, action: &[f64]) -> Vec<f64> {
        match self.cfg.action_space {
            ActionSpace::Box { low, high } => action.iter().map(|a| a.clamp(low, high)).collect(),
            ActionSpace::Simplex => {
                let floor = 1e-6;
                let clipped: Vec<f64> = action.iter().map(|a| a.max(floor)).collect();
                let sum: f64 = clipped.iter().sum();
                clipped.iter().map(|a| a / sum).collect()
            }
        }
    }

    fn raw_action(&self, params: &ParamVector, s: &[f64]) -> Vec<f64> {
        self.actor_spec.trace(params, s).acts.pop().unwrap()
    }

    /// Deterministic policy output `μ(s)` mapped into the action set.
    pub fn policy(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_state(s)?;
        Ok(self.squash(&self.raw_action(&self.actor, s)))
    }

    fn uniform_action(&mut self) -> Vec<f64> {
        let n = self.cfg.action_dim;
        match self.cfg.action_space {
            ActionSpace::Box { low, high } => (0..n).map(|_| self.rng.random_range(low..=high)).collect(),
            ActionSpace::Simplex => {
                let draws: Vec<f64> = (0..n)
                    .map(|_| {
                        let e: f64 = Exp1.sample(&mut self.rng);
                        e.max(f64::MIN_POSITIVE)
                    })
                    .collect();
                let sum: f64 = draws.iter().sum();
                draws.iter().map(|d| d / sum).collect()
            }
        }
    }

    /// Choose an action. With `explore`, the first `warmup_steps` calls draw
    /// uniformly from the action set and later calls add Gaussian noise to the
    /// raw actor output.
    pub fn act(&mut self, s: &[f64], explore: bool) -> Result<Vec<f64>> {
        self.check_state(s)?;
        if !explore {
            return self.policy(s);
        }
        let step = self.steps;
        self.steps += 1;
        if step < self.cfg.hyper.warmup_steps {
            return Ok(self.uniform_action());
        }
        let mut raw = self.raw_action(&self.actor, s);
        for z in &mut raw {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            *z += self.noise_std * n;
        }
        Ok(self.squash(&raw))
    }

    /// Shrink exploration noise, never below 1% of its initial value.
    pub fn decay_noise(&mut self) {
        let floor = 0.01 * self.cfg.hyper.noise_std0;
        self.noise_std = (self.noise_std * self.cfg.hyper.noise_decay).max(floor);
    }

    pub fn clip_reward(&self, r: f64) -> f64 {
        let c = self.cfg.hyper.reward_clip;
        r.clamp(-c, c)
    }

    /// Append a transition, clipping its reward.
    pub fn store(&mut self, mut t: Transition) -> Result<()> {
        if t.state.len() != self.cfg.state_dim || t.next_state.len() != self.cfg.state_dim {
            return Err(Error::dim("transition state", self.cfg.state_dim, t.state.len()));
        }
        if t.action.len() != self.cfg.action_dim {
            return Err(Error::dim("transition action", self.cfg.action_dim, t.action.len()));
        }
        if !t.reward.is_finite() {
            return Err(Error::Structure("non-finite reward".into()));
        }
        t.reward = self.clip_reward(t.reward);
        self.buffer.push(t);
        Ok(())
    }

    fn critic_input(s: &[f64], a: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(s.len() + a.len());
        x.extend_from_slice(s);
        x.extend_from_slice(a);
        x
    }

    /// Q-value of `(s, a)` under the given critic parameters.
    pub fn q_value(&self, critic: &ParamVector, s: &[f64], a: &[f64]) -> f64 {
        self.critic_spec.trace(critic, &Self::critic_input(s, a)).raw_output()[0]
    }

    /// Bootstrapped regression target `r + γ Q'(s', μ'(s'))`.
    pub fn td_target(&self, t: &Transition) -> f64 {
        let next_action = self.squash(&self.raw_action(&self.actor_target, &t.next_state));
        t.reward + self.cfg.hyper.discount * self.q_value(&self.critic_target, &t.next_state, &next_action)
    }

    /// Mean squared TD error over `batch` for the given critic parameters.
    pub fn critic_loss_and_grad(&self, batch: &[&Transition], critic: &ParamVector) -> Result<(f64, Gradient)> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| Self::critic_input(&t.state, &t.action)).collect();
        let targets: Vec<[f64; 1]> = batch.iter().map(|t| [self.td_target(t)]).collect();
        let xs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let ys: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
        mse_loss_and_grad(&self.critic_spec, critic, &xs, &ys)
    }

    /// Deterministic policy-gradient objective `J = mean_s Q(s, μ(s; θ))`
    /// under the current critic, and `∇_θ J` by the chain rule through it.
    pub fn actor_objective_and_grad(&self, states: &[&[f64]], actor: &ParamVector) -> Result<(f64, Gradient)> {
        if states.is_empty() {
            return Err(Error::Usage("actor objective over no states".into()));
        }
        let mut grad = Gradient::zeros(actor.len());
        let mut total = 0.0;
        let n = states.len() as f64;
        let sd = self.cfg.state_dim;
        for s in states {
            self.actor_spec.check(actor, s)?;
            let a_trace = self.actor_spec.trace(actor, s);
            let raw = a_trace.raw_output();
            let action = self.squash(raw);
            let c_trace = self.critic_spec.trace(&self.critic, &Self::critic_input(s, &action));
            total += c_trace.raw_output()[0];
            let mut scratch = vec![0.0; self.critic.len()];
            let mut d_input = Vec::new();
            self.critic_spec
                .backward(&self.critic, &c_trace, &[1.0 / n], &mut scratch, Some(&mut d_input));
            let d_raw = self.squash_backprop(raw, &action, &d_input[sd..]);
            self.actor_spec.backward(actor, &a_trace, &d_raw, &mut grad, None);
        }
        Ok((total / n, grad))
    }

    /// One update from a uniformly sampled batch: critic descent on the TD
    /// loss, actor ascent on `J`, then soft target updates with rate β.
    /// Returns `None` while the buffer holds fewer than `batch_size` entries.
    pub fn learn_step(&mut self) -> Result<Option<LearnStats>> {
        let h = &self.cfg.hyper;
        if self.buffer.len() < h.batch_size {
            return Ok(None);
        }
        let idx = self.buffer.sample_indices(h.batch_size, &mut self.rng);
        let batch: Vec<&Transition> = idx.iter().map(|&i| self.buffer.get(i).unwrap()).collect();
        let (critic_loss, critic_grad) = self.critic_loss_and_grad(&batch, &self.critic)?;
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let (actor_objective, actor_grad) = self.actor_objective_and_grad(&states, &self.actor)?;

        let (beta, sync) = (h.target_rate, h.target_sync);
        let (actor_lr, critic_lr) = (h.actor_lr, h.critic_lr);
        let old_actor = self.actor.clone();
        let old_critic = self.critic.clone();
        for (p, g) in self.critic.iter_mut().zip(critic_grad.iter()) {
            *p -= critic_lr * g;
        }
        for (p, g) in self.actor.iter_mut().zip(actor_grad.iter()) {
            *p += actor_lr * g;
        }
        let (actor_src, critic_src) = match sync {
            TargetSync::PreUpdate => (&old_actor, &old_critic),
            TargetSync::PostUpdate => (&self.actor, &self.critic),
        };
        soft_update(&mut self.actor_target, actor_src, beta);
        soft_update(&mut self.critic_target, critic_src, beta);
        if !(self.actor.is_finite() && self.critic.is_finite()) {
            return Err(Error::Structure("agent parameters diverged to non-finite values".into()));
        }
        Ok(Some(LearnStats {
            critic_loss,
            actor_objective,
        }))
    }

    /// Binary checkpoint: configuration, counters and the four networks.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BinWriter::new(out);
        let c = &self.cfg;
        let h = &c.hyper;
        w.u64(CHECKPOINT_VERSION)?;
        w.u64(c.state_dim as u64)?;
        w.u64(c.action_dim as u64)?;
        match c.action_space {
            ActionSpace::Simplex => {
                w.u64(0)?;
                w.f64(0.0)?;
                w.f64(0.0)?;
            }
            ActionSpace::Box { low, high } => {
                w.u64(1)?;
                w.f64(low)?;
                w.f64(high)?;
            }
        }
        w.u64(h.hidden_layers.len() as u64)?;
        for &n in &h.hidden_layers {
            w.u64(n as u64)?;
        }
        w.u64(match h.hidden_activation {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        })?;
        w.f64(h.actor_lr)?;
        w.f64(h.critic_lr)?;
        w.f64(h.target_rate)?;
        w.f64(h.discount)?;
        w.u64(h.buffer_capacity as u64)?;
        w.u64(h.batch_size as u64)?;
        w.f64(h.noise_std0)?;
        w.f64(h.noise_decay)?;
        w.u64(h.warmup_steps)?;
        w.f64(h.reward_clip)?;
        w.u64(match h.target_sync {
            TargetSync::PreUpdate => 0,
            TargetSync::PostUpdate => 1,
        })?;
        w.u64(self.seed)?;
        w.u64(self.steps)?;
        w.f64(self.noise_std)?;
        for v in [&self.actor, &self.critic, &self.actor_target, &self.critic_target] {
            w.vec(v)?;
        }
        Ok(())
    }

    /// Restore a checkpoint. The replay buffer starts empty.
    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = BinReader::new(input);
        let version = r.u64()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported agent checkpoint version {version}")));
        }
        let state_dim = r.usize()?;
        let action_dim = r.usize()?;
        let space_code = r.u64()?;
        let (low, high) = (r.f64()?, r.f64()?);
        let action_space = match space_code {
            0 => ActionSpace::Simplex,
            1 => ActionSpace::Box { low, high },
            other => return Err(Error::Format(format!("unknown action space code {other}"))),
        };
        let layers = r.usize()?;
        let hidden_layers = (0..layers).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let hidden_activation = match r.u64()? {
            0 => Activation::Tanh,
            1 => Activation::Relu,
            other => return Err(Error::Format(format!("unknown activation code {other}"))),
        };
        let hyper = DdpgHyper {
            hidden_layers,
            hidden_activation,
            actor_lr: r.f64()?,
            critic_lr: r.f64()?,
            target_rate: r.f64()?,
            discount: r.f64()?,
            buffer_capacity: r.usize()?,
            batch_size: r.usize()?,
            noise_std0: r.f64()?,
            noise_decay: r.f64()?,
            warmup_steps: r.u64()?,
            reward_clip: r.f64()?,
            target_sync: match r.u64()? {
                0 => TargetSync::PreUpdate,
                1 => TargetSync::PostUpdate,
                other => return Err(Error::Format(format!("unknown target sync code {other}"))),
            },
        };
        let cfg = DdpgConfig::new(state_dim, action_dim, action_space, hyper)
            .map_err(|e| Error::Format(e.to_string()))?;
        let seed = r.u64()?;
        let mut agent = DdpgAgent::new(cfg, seed);
        agent.steps = r.u64()?;
        agent.noise_std = r.f64()?;
        let vectors: Vec<Vec<f64>> = (0..4).map(|_| r.vec()).collect::<Result<_>>()?;
        r.finish()?;
        let [actor, critic, actor_target, critic_target]: [Vec<f64>; 4] = vectors.try_into().unwrap();
        if actor.len() != agent.actor.len() || actor_target.len() != agent.actor.len() {
            return Err(Error::Format("actor parameter count does not match config".into()));
        }
        if critic.len() != agent.critic.len() || critic_target.len() != agent.critic.len() {
            return Err(Error::Format("critic parameter count does not match config".into()));
        }
        agent.actor = actor.into();
        agent.critic = critic.into();
        agent.actor_target = actor_target.into();
        agent.critic_target = critic_target.into();
        Ok(agent)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

const CHECKPOINT_VERSION: u64 = 1;

fn soft_update(target: &mut ParamVector, source: &ParamVector, beta: f64) {
    for (t, s) in target.iter_mut().zip(source.iter()) {
        *t = beta * s + (1.0 - beta) * *t;
    }
}
