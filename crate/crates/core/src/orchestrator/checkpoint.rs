use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::learner::Learner;
use super::sim::{agent_configs, build_data, Agents, Simulation};
use crate::binfmt::{BinReader, BinWriter};
use crate::ddpg::DdpgAgent;
use crate::error::{Error, Result};
use crate::numerics::ParamVector;

pub const CHECKPOINT_FORMAT: u32 = 1;
const MANIFEST: &str = "checkpoint.json";
const MODELS: &str = "models.bin";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: u32,
    seed: u64,
    rounds_done: usize,
    grad_steps: u64,
    has_agents: bool,
    config: ExperimentConfig,
}

fn agent_file(i: Option<usize>) -> String {
    match i {
        None => "agent_server.bin".into(),
        Some(i) => format!("agent_client_{i}.bin"),
    }
}

impl Simulation {
    /// Save models, agents and enough metadata to rebuild the data. Pending
    /// transitions and replay buffers are not kept.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            format: CHECKPOINT_FORMAT,
            seed: self.seed,
            rounds_done: self.t,
            grad_steps: self.grad_steps,
            has_agents: self.agents.is_some(),
            config: (*self.cfg).clone(),
        };
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
        let mut w = BinWriter::new(BufWriter::new(File::create(dir.join(MODELS))?));
        w.u64(self.locals.len() as u64)?;
        w.vec(&self.global)?;
        for m in &self.locals {
            w.vec(m)?;
        }
        w.into_inner().into_inner().map_err(|e| e.into_error())?;
        if let Some(a) = &self.agents {
            a.server.agent.write_to(BufWriter::new(File::create(dir.join(agent_file(None)))?))?;
            for (i, l) in a.clients.iter().enumerate() {
                l.agent.write_to(BufWriter::new(File::create(dir.join(agent_file(Some(i))))?))?;
            }
        }
        Ok(())
    }

    /// Restore a simulation saved by [`Simulation::save_checkpoint`].
    pub fn load_checkpoint(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("checkpoint manifest: {e}")))?;
        if m.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unsupported checkpoint format {}", m.format)));
        }
        m.config.validate()?;
        let data = build_data(&m.config)?;
        let mut sim = Simulation::with_data(&m.config, Arc::new(data), m.seed)?;

        let mut r = BinReader::new(BufReader::new(File::open(dir.join(MODELS))?));
        let n = r.usize()?;
        if n != m.config.num_clients {
            return Err(Error::Format(format!("checkpoint holds {n} local models for {} clients", m.config.num_clients)));
        }
        let global = ParamVector::from(r.vec()?);
        let locals = (0..n).map(|_| r.vec().map(ParamVector::from)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let count = sim.model.param_count();
        if global.len() != count || locals.iter().any(|w| w.len() != count) {
            return Err(Error::Format("checkpoint model size does not match the config".into()));
        }
        sim.global = global;
        sim.locals = locals;
        sim.t = m.rounds_done;
        sim.grad_steps = m.grad_steps;

        sim.agents = if m.has_agents {
            let (server_cfg, client_cfg) = agent_configs(&m.config)?;
            let load = |i: Option<usize>, expect: &crate::ddpg::DdpgConfig| -> Result<Learner> {
                let agent = DdpgAgent::read_from(BufReader::new(File::open(dir.join(agent_file(i)))?))?;
                if agent.config() != expect {
                    return Err(Error::Format(format!("{} does not match the config", agent_file(i))));
                }
                Ok(Learner::new(agent))
            };
            let server = load(None, &server_cfg)?;
            let clients = (0..n).map(|i| load(Some(i), &client_cfg)).collect::<Result<Vec<_>>>()?;
            Some(Agents { server, clients })
        } else {
            None
        };
        Ok(sim)
    }
}
