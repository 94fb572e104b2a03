use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, Weighting};
use super::equilibrium::window_settled;
use super::learner::{Learner, Mode};
use crate::data::{generate_synthetic, partition, split_train_test, ClientSplit, Dataset, FederatedData};
use crate::ddpg::{ActionSpace, DdpgAgent, DdpgConfig};
use crate::error::{Error, Result};
use crate::flcore::{aggregate, evaluate, evaluate_rows, local_train, AggregationWeights, LocalTrainSpec};
use crate::game::{client_action_from_unit, client_reward, server_reward, utility, ClientState, ServerState};
use crate::numerics::{MlpSpec, ParamVector};
use crate::rng::{derive_seed, rng_from, stream};

/// Metrics of one completed round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// Accuracy and loss of the new global model on the server test set.
    pub global_acc: f64,
    pub global_loss: f64,
    /// Mean and population variance of the uploaded models' local test accuracy.
    pub mean_local_acc: f64,
    pub var_local_acc: f64,
    /// Mean local test accuracy of the incoming global model, before local training.
    pub mean_local_acc_pre: f64,
    pub r_cs: f64,
    pub mean_r_i: f64,
    pub weights: Vec<f64>,
    pub alphas: Vec<usize>,
    pub etas: Vec<f64>,
    pub wall_ms: f64,
}

/// Result of one complete run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub seed: u64,
    pub history: Vec<RoundRecord>,
    pub global: ParamVector,
    pub locals: Vec<ParamVector>,
    pub equilibrium_round: Option<usize>,
    /// Local gradient steps taken by all clients over the run.
    pub grad_steps: u64,
}

/// Client data for an experiment: the generator's clients, or their pooled
/// samples re-dealt by the configured partition and split per client.
pub fn build_data(cfg: &ExperimentConfig) -> Result<FederatedData> {
    let generated = generate_synthetic(&cfg.data.synthetic)?;
    let Some(p) = &cfg.data.partition else {
        return Ok(generated);
    };
    let pool = Dataset::concat(generated.clients.iter().flat_map(|c| [&c.train, &c.test]))?;
    let parts = partition(&pool, cfg.num_clients, p.scheme, &mut rng_from(p.seed, &[stream::PARTITION]))?;
    let mut clients = Vec::with_capacity(parts.len());
    for (i, part) in parts.iter().enumerate() {
        if part.len() < 2 {
            return Err(Error::Usage(format!("client {i} received {} samples; need at least 2", part.len())));
        }
        let (train, test) = split_train_test(part, p.train_fraction, &mut rng_from(p.seed, &[stream::SPLIT, i as u64]))?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::Usage(format!("client {i} has an empty train or test split")));
        }
        clients.push(ClientSplit { train, test });
    }
    Ok(FederatedData {
        clients,
        server_test: generated.server_test,
    })
}

#[derive(Clone, Debug)]
pub(crate) struct Agents {
    pub server: Learner,
    pub clients: Vec<Learner>,
}

/// Server and client agent configurations for `cfg`.
pub fn agent_configs(cfg: &ExperimentConfig) -> Result<(DdpgConfig, DdpgConfig)> {
    let n = cfg.num_clients;
    let server = DdpgConfig::new(n, n, ActionSpace::Simplex, cfg.server_agent.clone())?;
    let unit = ActionSpace::Box { low: -1.0, high: 1.0 };
    let client = DdpgConfig::new(1, 2, unit, cfg.client_agent.clone())?;
    Ok((server, client))
}

/// Per-player utilities of one round: server first, then every client.
pub type StageUtilities = Vec<f64>;

struct ClientRound {
    model: ParamVector,
    alpha: usize,
    eta: f64,
    train_loss: f64,
    pre_acc: f64,
    local_acc: f64,
    reward: f64,
    state: Option<Vec<f64>>,
    action: Option<Vec<f64>>,
    steps: u64,
}

/// A federated training run in progress.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub(crate) cfg: Arc<ExperimentConfig>,
    pub(crate) data: Arc<FederatedData>,
    pub(crate) model: MlpSpec,
    pub(crate) seed: u64,
    pub(crate) global: ParamVector,
    pub(crate) locals: Vec<ParamVector>,
    /// Rounds completed so far.
    pub(crate) t: usize,
    pub(crate) agents: Option<Agents>,
    pub(crate) grad_steps: u64,
}

impl Simulation {
    /// Build data, the initial global model and (for PAGE without a freeze)
    /// the agents; `seed` drives everything except the dataset itself.
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let data = build_data(cfg)?;
        Self::with_data(cfg, Arc::new(data), seed)
    }

    pub fn with_data(cfg: &ExperimentConfig, data: Arc<FederatedData>, seed: u64) -> Result<Self> {
        if data.clients.len() != cfg.num_clients {
            return Err(Error::dim("client datasets", cfg.num_clients, data.clients.len()));
        }
        let model = cfg.model_spec()?;
        let global = model.init_params(&mut rng_from(seed, &[stream::MODEL_INIT]));
        let agents = if cfg.algorithm == Algorithm::Page && cfg.freeze.is_none() {
            let (server_cfg, client_cfg) = agent_configs(cfg)?;
            let server = Learner::new(DdpgAgent::new(server_cfg, derive_seed(seed, &[stream::SERVER_AGENT])));
            let clients = (0..cfg.num_clients)
                .map(|i| {
                    let s = derive_seed(seed, &[stream::CLIENT_AGENT, i as u64]);
                    Learner::new(DdpgAgent::new(client_cfg.clone(), s))
                })
                .collect();
            Some(Agents { server, clients })
        } else {
            None
        };
        Ok(Self {
            locals: vec![global.clone(); cfg.num_clients],
            cfg: Arc::new(cfg.clone()),
            data,
            model,
            seed,
            global,
            t: 0,
            agents,
            grad_steps: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn data(&self) -> &FederatedData {
        &self.data
    }

    pub fn model(&self) -> &MlpSpec {
        &self.model
    }

    pub fn global(&self) -> &ParamVector {
        &self.global
    }

    pub fn locals(&self) -> &[ParamVector] {
        &self.locals
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rounds_done(&self) -> usize {
        self.t
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn has_agents(&self) -> bool {
        self.agents.is_some()
    }

    pub fn server_agent(&self) -> Option<&DdpgAgent> {
        self.agents.as_ref().map(|a| &a.server.agent)
    }

    pub fn client_agent(&self, i: usize) -> Option<&DdpgAgent> {
        self.agents.as_ref().and_then(|a| a.clients.get(i)).map(|l| &l.agent)
    }

    fn client_round(&self, i: usize, t: usize, learner: Option<&mut Learner>, mode: Mode<'_>) -> Result<ClientRound> {
        let cfg = &*self.cfg;
        let split = &self.data.clients[i];
        let pre_acc = evaluate(&self.model, &self.global, &split.test)?.accuracy;
        let (alpha, eta, state, action) = match (cfg.algorithm, learner, &cfg.freeze) {
            (Algorithm::Page, Some(l), _) => {
                let state = ClientState::new(pre_acc)?.to_vec();
                let unit = l.decide(&state, mode, i + 1)?;
                let (alpha, eta) = client_action_from_unit(&unit, &cfg.bounds)?;
                (alpha, eta, Some(state), Some(unit))
            }
            (Algorithm::Page, None, Some(f)) => (f.alpha, f.eta, None, None),
            (Algorithm::Page, None, None) => return Err(Error::Structure("PAGE run without agents".into())),
            _ => (cfg.local_train.epochs, cfg.local_train.learning_rate, None, None),
        };
        let spec = LocalTrainSpec {
            epochs: alpha,
            learning_rate: eta,
            minibatch_size: cfg.local_train.minibatch_size,
            prox_mu: if cfg.algorithm == Algorithm::Fedprox { cfg.local_train.prox_mu } else { 0.0 },
        };
        let mut rng = rng_from(self.seed, &[stream::LOCAL_TRAIN, t as u64, i as u64]);
        let model = local_train(&self.model, &self.global, &split.train, &spec, &self.global, &mut rng)?;
        let train_loss = evaluate(&self.model, &model, &split.train)?.loss;
        let local_acc = evaluate(&self.model, &model, &split.test)?.accuracy;
        Ok(ClientRound {
            reward: client_reward(train_loss, cfg.kappa_local, cfg.client_agent.reward_clip),
            steps: spec.steps_for(split.train.len()) as u64,
            model,
            alpha,
            eta,
            train_loss,
            pre_acc,
            local_acc,
            state,
            action,
        })
    }

    fn server_state(&self, t: usize, models: &[ParamVector]) -> Result<Vec<f64>> {
        let test = &self.data.server_test;
        let rows: Option<Vec<usize>> = self.cfg.server_eval_subsample.filter(|&m| m < test.len()).map(|m| {
            let mut rng = rng_from(self.seed, &[stream::SERVER_EVAL, t as u64]);
            let mut idx = sample(&mut rng, test.len(), m).into_vec();
            idx.sort_unstable();
            idx
        });
        let acc = models
            .iter()
            .map(|w| {
                let e = match &rows {
                    Some(r) => evaluate_rows(&self.model, w, test, r.iter().copied())?,
                    None => evaluate(&self.model, w, test)?,
                };
                Ok(e.accuracy)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ServerState::new(acc)?.as_slice().to_vec())
    }

    fn baseline_weights(&self) -> Result<AggregationWeights> {
        match self.cfg.fedavg_weighting {
            Weighting::Uniform => Ok(AggregationWeights::uniform(self.cfg.num_clients)),
            Weighting::DataSize => {
                let sizes: Vec<usize> = self.data.clients.iter().map(|c| c.train.len()).collect();
                AggregationWeights::proportional(&sizes)
            }
        }
    }

    /// Play the next round. Returns its record and every player's unclipped utility.
    pub fn play_round(&mut self, mode: Mode<'_>) -> Result<(RoundRecord, StageUtilities)> {
        let started = self.cfg.timing.then(Instant::now);
        let t = self.t + 1;
        let n = self.cfg.num_clients;
        let mut agents = self.agents.take();
        let results: Result<Vec<ClientRound>> = {
            let this = &*self;
            match agents.as_mut() {
                Some(a) => a
                    .clients
                    .par_iter_mut()
                    .enumerate()
                    .map(|(i, l)| this.client_round(i, t, Some(l), mode))
                    .collect(),
                None => (0..n).into_par_iter().map(|i| this.client_round(i, t, None, mode)).collect(),
            }
        };
        let rounds = match results {
            Ok(r) => r,
            Err(e) => {
                self.agents = agents;
                return Err(e);
            }
        };
        let models: Vec<ParamVector> = rounds.iter().map(|c| c.model.clone()).collect();
        let losses: Vec<f64> = rounds.iter().map(|c| c.train_loss).collect();

        let server_step = match agents.as_mut() {
            Some(a) => self.server_state(t, &models).and_then(|s| {
                let action = a.server.decide(&s, mode, 0)?;
                Ok((AggregationWeights::new(action.clone())?, Some((s, action))))
            }),
            None if self.cfg.algorithm == Algorithm::Page => Ok((AggregationWeights::uniform(n), None)),
            None => self.baseline_weights().map(|w| (w, None)),
        };
        let (weights, server_obs) = match server_step {
            Ok(v) => v,
            Err(e) => {
                self.agents = agents;
                return Err(e);
            }
        };
        let r_cs = server_reward(&losses, &weights, self.cfg.kappa_global, self.cfg.server_agent.reward_clip)?;
        if let (Some(a), Mode::Learn) = (agents.as_mut(), mode) {
            if let Some((s, action)) = server_obs {
                a.server.remember(s, action, r_cs);
            }
            for (l, c) in a.clients.iter_mut().zip(&rounds) {
                if let (Some(s), Some(action)) = (&c.state, &c.action) {
                    l.remember(s.clone(), action.clone(), c.reward);
                }
            }
        }
        self.agents = agents;

        self.global = aggregate(&models, &weights)?;
        let global_eval = evaluate(&self.model, &self.global, &self.data.server_test)?;
        let local_accs: Vec<f64> = rounds.iter().map(|c| c.local_acc).collect();
        let mean_local = local_accs.iter().sum::<f64>() / n as f64;
        let var_local = local_accs.iter().map(|a| (a - mean_local).powi(2)).sum::<f64>() / n as f64;
        let mean_r_i = rounds.iter().map(|c| c.reward).sum::<f64>() / n as f64;

        let weighted_loss: f64 = losses.iter().zip(weights.as_slice()).fold(0.0, |acc, (f, p)| acc + p * f);
        let mut utilities = Vec::with_capacity(n + 1);
        utilities.push(utility(weighted_loss));
        utilities.extend(losses.iter().map(|f| utility(*f)));

        self.grad_steps += rounds.iter().map(|c| c.steps).sum::<u64>();
        self.locals = models;
        self.t = t;
        let record = RoundRecord {
            t,
            global_acc: global_eval.accuracy,
            global_loss: global_eval.loss,
            mean_local_acc: mean_local,
            var_local_acc: var_local,
            mean_local_acc_pre: rounds.iter().map(|c| c.pre_acc).sum::<f64>() / n as f64,
            r_cs,
            mean_r_i,
            weights: weights.as_slice().to_vec(),
            alphas: rounds.iter().map(|c| c.alpha).collect(),
            etas: rounds.iter().map(|c| c.eta).collect(),
            wall_ms: started.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3),
        };
        Ok((record, utilities))
    }

    /// Train until `t_max` rounds or, if enabled, the first equilibrium round.
    pub fn run_to_end(&mut self) -> Result<(Vec<RoundRecord>, Option<usize>)> {
        let stop = self.cfg.stop.clone();
        let mut history = Vec::with_capacity(self.cfg.t_max);
        let (mut global, mut local) = (Vec::new(), Vec::new());
        while self.t < self.cfg.t_max {
            let (record, _) = self.play_round(Mode::Learn)?;
            global.push(record.global_acc);
            local.push(record.mean_local_acc);
            let t = record.t;
            history.push(record);
            if stop.enabled && window_settled(&global, &local, global.len() - 1, stop.window, stop.tolerance) {
                return Ok((history, Some(t)));
            }
        }
        let eq = super::equilibrium::detect_equilibrium(&history, stop.window, stop.tolerance);
        Ok((history, eq))
    }

    pub fn into_outcome(self, history: Vec<RoundRecord>, equilibrium_round: Option<usize>) -> RunOutcome {
        RunOutcome {
            seed: self.seed,
            history,
            global: self.global,
            locals: self.locals,
            equilibrium_round,
            grad_steps: self.grad_steps,
        }
    }
}

fn run_checked(cfg: &ExperimentConfig, expected: Algorithm) -> Result<RunOutcome> {
    if cfg.algorithm != expected {
        return Err(Error::Usage(format!(
            "config selects `{}`, expected `{}`",
            cfg.algorithm.name(),
            expected.name()
        )));
    }
    run(cfg, cfg.seed)
}

/// Run whichever algorithm `cfg` selects with the given seed.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let mut sim = Simulation::new(cfg, seed)?;
    let (history, eq) = sim.run_to_end()?;
    Ok(sim.into_outcome(history, eq))
}

pub fn run_page(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_checked(cfg, Algorithm::Page)
}

pub fn run_fedavg(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_checked(cfg, Algorithm::Fedavg)
}

pub fn run_fedprox(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_checked(cfg, Algorithm::Fedprox)
}
