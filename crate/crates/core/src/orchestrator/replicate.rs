use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use super::sim::{build_data, RunOutcome, Simulation};
use crate::error::{Error, Result};

/// Final metrics of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub rounds: usize,
    pub final_global_acc: f64,
    pub final_global_loss: f64,
    pub final_local_acc: f64,
    pub final_var_local_acc: f64,
    pub final_local_acc_pre: f64,
    pub equilibrium_round: Option<usize>,
    /// Equilibrium round, or the last round played when none was detected.
    pub convergence_round: usize,
    pub grad_steps: u64,
}

impl RunSummary {
    pub fn from_outcome(outcome: &RunOutcome) -> Result<Self> {
        let last = outcome
            .history
            .last()
            .ok_or_else(|| Error::Structure("run produced no rounds".into()))?;
        Ok(Self {
            seed: outcome.seed,
            rounds: outcome.history.len(),
            final_global_acc: last.global_acc,
            final_global_loss: last.global_loss,
            final_local_acc: last.mean_local_acc,
            final_var_local_acc: last.var_local_acc,
            final_local_acc_pre: last.mean_local_acc_pre,
            equilibrium_round: outcome.equilibrium_round,
            convergence_round: outcome.equilibrium_round.unwrap_or(last.t),
            grad_steps: outcome.grad_steps,
        })
    }
}

/// Mean and population variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub variance: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, variance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicatedSummary {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
    pub global_acc: Stat,
    pub local_acc: Stat,
    pub convergence_round: Stat,
}

impl ReplicatedSummary {
    pub fn from_runs(algorithm: Algorithm, runs: Vec<RunSummary>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Usage("summary over zero runs".into()));
        }
        let col = |f: fn(&RunSummary) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        Ok(Self {
            algorithm,
            seeds: runs.iter().map(|r| r.seed).collect(),
            global_acc: Stat::of(&col(|r| r.final_global_acc)),
            local_acc: Stat::of(&col(|r| r.final_local_acc)),
            convergence_round: Stat::of(&col(|r| r.convergence_round as f64)),
            runs,
        })
    }
}

/// Seeds used by [`run_replicated`]: `seed + k` for each run index `k`.
pub fn replicate_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.runs as u64).map(|k| cfg.seed.wrapping_add(k)).collect()
}

/// Run `cfg.runs` experiments on one shared dataset and summarize them.
pub fn run_replicated(cfg: &ExperimentConfig) -> Result<(Vec<RunOutcome>, ReplicatedSummary)> {
    run_replicated_with(cfg, |_| Ok(()))
}

/// [`run_replicated`], calling `finished` on each simulation after its last round.
pub fn run_replicated_with(
    cfg: &ExperimentConfig,
    mut finished: impl FnMut(&Simulation) -> Result<()>,
) -> Result<(Vec<RunOutcome>, ReplicatedSummary)> {
    cfg.validate()?;
    let data = Arc::new(build_data(cfg)?);
    let mut outcomes = Vec::with_capacity(cfg.runs);
    for seed in replicate_seeds(cfg) {
        let mut sim = Simulation::with_data(cfg, Arc::clone(&data), seed)?;
        let (history, eq) = sim.run_to_end()?;
        finished(&sim)?;
        outcomes.push(sim.into_outcome(history, eq));
    }
    let runs = outcomes.iter().map(RunSummary::from_outcome).collect::<Result<Vec<_>>>()?;
    let summary = ReplicatedSummary::from_runs(cfg.algorithm, runs)?;
    Ok((outcomes, summary))
}
