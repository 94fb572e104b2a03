use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::payoff::{discounted_sum, DiscountConvention};
use crate::ddpg::bandit::QuadraticBandit;
use crate::ddpg::DdpgAgent;
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

/// A one-stage change to a single player's policy action.
#[derive(Clone, Copy, Debug)]
pub struct Deviation<'a> {
    pub player: usize,
    pub delta: &'a [f64],
}

/// A repeated game whose players follow frozen policies. Cloning must give
/// a fully independent copy so that rollouts can be replayed.
pub trait StageGame: Clone {
    fn players(&self) -> usize;

    /// Length of the action vector a deviation perturbs.
    fn action_dim(&self, player: usize) -> usize;

    /// 1-based index of the stage the next `step` plays.
    fn stage(&self) -> usize;

    /// Play one stage, applying `deviation` if given, and return every
    /// player's unclipped utility.
    fn step(&mut self, deviation: Option<Deviation<'_>>) -> Result<Vec<f64>>;
}

/// Add `delta` to `action` and map back with `project`. A zero delta leaves
/// the action untouched bit for bit.
pub fn perturb(action: Vec<f64>, delta: &[f64], project: impl FnOnce(Vec<f64>) -> Vec<f64>) -> Vec<f64> {
    if delta.iter().all(|d| *d == 0.0) {
        return action;
    }
    project(action.iter().zip(delta).map(|(a, d)| a + d).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FseConfig {
    pub probes: usize,
    pub horizon: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    /// Make the first probe a zero perturbation.
    pub include_identity: bool,
    pub discount: f64,
    pub convention: DiscountConvention,
    pub seed: u64,
}

impl Default for FseConfig {
    fn default() -> Self {
        Self {
            probes: 20,
            horizon: 5,
            min_magnitude: 0.2,
            max_magnitude: 0.5,
            include_identity: true,
            discount: 0.99,
            convention: DiscountConvention::StageExponent,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub player: usize,
    pub stage: usize,
    pub magnitude: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FseReport {
    pub horizon: usize,
    pub first_stage: usize,
    pub probes: Vec<ProbeResult>,
    pub positive_fraction: Option<f64>,
    pub max_delta: Option<f64>,
    pub baseline_payoffs: Vec<f64>,
    pub certified: Option<bool>,
}

/// Share of probes a certificate tolerates with a payoff gain.
pub const CERT_MAX_FRACTION: f64 = 0.05;
/// Largest tolerated gain relative to the deviating player's baseline payoff.
pub const CERT_MAX_RELATIVE_GAIN: f64 = 0.01;

fn rollout<G: StageGame>(game: &G, horizon: usize, deviation: Option<(usize, Deviation<'_>)>) -> Result<Vec<Vec<f64>>> {
    let mut g = game.clone();
    let mut utilities = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let dev = deviation.and_then(|(at, d)| (at == k).then_some(d));
        utilities.push(g.step(dev)?);
    }
    Ok(utilities)
}

fn payoffs(utilities: &[Vec<f64>], players: usize, first_stage: usize, cfg: &FseConfig) -> Vec<f64> {
    (0..players)
        .map(|p| {
            let seq: Vec<f64> = utilities.iter().map(|u| u[p]).collect();
            discounted_sum(&seq, first_stage, cfg.discount, cfg.convention)
        })
        .collect()
}

/// Probe `game` with random unilateral single-stage deviations and compare
/// each deviator's discounted payoff over `horizon` stages to the rollout
/// where everyone follows their policy.
pub fn fse_diagnostic<G: StageGame>(game: &G, cfg: &FseConfig) -> Result<FseReport> {
    let players = game.players();
    if players == 0 || cfg.horizon == 0 {
        return Err(Error::Usage("diagnostic needs at least one player and a positive horizon".into()));
    }
    if !(0.0 <= cfg.min_magnitude && cfg.min_magnitude <= cfg.max_magnitude && cfg.max_magnitude.is_finite()) {
        return Err(Error::Usage("probe magnitudes must satisfy 0 <= min <= max".into()));
    }
    let first_stage = game.stage();
    let base = rollout(game, cfg.horizon, None)?;
    if base.iter().any(|u| u.len() != players) {
        return Err(Error::Structure("stage returned the wrong number of utilities".into()));
    }
    let baseline = payoffs(&base, players, first_stage, cfg);

    let mut rng = rng_from(cfg.seed, &[stream::PROBE]);
    let mut probes = Vec::with_capacity(cfg.probes);
    let mut certified = true;
    for k in 0..cfg.probes {
        let identity = cfg.include_identity && k == 0;
        let player = if identity { 0 } else { rng.random_range(0..players) };
        let at = if identity { 0 } else { rng.random_range(0..cfg.horizon) };
        let dim = game.action_dim(player);
        let magnitude = if identity {
            0.0
        } else {
            rng.random_range(cfg.min_magnitude..=cfg.max_magnitude)
        };
        let delta = random_direction(dim, &mut rng).into_iter().map(|d| d * magnitude).collect::<Vec<_>>();
        let dev = Deviation { player, delta: &delta };
        let utilities = rollout(game, cfg.horizon, Some((at, dev)))?;
        let deviated = payoffs(&utilities, players, first_stage, cfg)[player];
        let gain = deviated - baseline[player];
        if gain > CERT_MAX_RELATIVE_GAIN * baseline[player].abs() {
            certified = false;
        }
        probes.push(ProbeResult {
            player,
            stage: first_stage + at,
            magnitude,
            delta: gain,
        });
    }

    let (positive_fraction, max_delta) = if probes.is_empty() {
        (None, None)
    } else {
        let positive = probes.iter().filter(|p| p.delta > 0.0).count();
        let max = probes.iter().map(|p| p.delta).fold(f64::NEG_INFINITY, f64::max);
        (Some(positive as f64 / probes.len() as f64), Some(max))
    };
    Ok(FseReport {
        horizon: cfg.horizon,
        first_stage,
        certified: positive_fraction.map(|f| f <= CERT_MAX_FRACTION && certified),
        probes,
        positive_fraction,
        max_delta,
        baseline_payoffs: baseline,
    })
}

fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    if dim == 1 {
        return vec![if rng.random_bool(0.5) { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// The quadratic bandit played by a frozen agent, as a one-player game.
#[derive(Clone, Debug)]
pub struct BanditGame {
    pub bandit: QuadraticBandit,
    pub agent: DdpgAgent,
    stage: usize,
}

impl BanditGame {
    pub fn new(bandit: QuadraticBandit, agent: DdpgAgent) -> Self {
        Self { bandit, agent, stage: 1 }
    }
}

impl StageGame for BanditGame {
    fn players(&self) -> usize {
        1
    }

    fn action_dim(&self, _player: usize) -> usize {
        1
    }

    fn stage(&self) -> usize {
        self.stage
    }

    fn step(&mut self, deviation: Option<Deviation<'_>>) -> Result<Vec<f64>> {
        let mut a = self.agent.policy(&QuadraticBandit::STATE)?;
        if let Some(d) = deviation {
            a = perturb(a, d.delta, |v| self.agent.project(&v));
        }
        self.stage += 1;
        Ok(vec![self.bandit.reward(a[0])])
    }
}
