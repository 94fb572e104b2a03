use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{PartitionConfig, SyntheticConfig};
use crate::ddpg::DdpgHyper;
use crate::error::{Error, Result};
use crate::flcore::LocalTrainSpec;
use crate::game::ActionBounds;
use crate::numerics::{Activation, MlpSpec, OutputHead};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Page,
    Fedavg,
    Fedprox,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Page => "page",
            Self::Fedavg => "fedavg",
            Self::Fedprox => "fedprox",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "page" => Ok(Self::Page),
            "fedavg" => Ok(Self::Fedavg),
            "fedprox" => Ok(Self::Fedprox),
            other => Err(Error::config("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

/// How the baselines weight client models.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    DataSize,
    Uniform,
}

/// Client data: the synthetic generator, optionally pooled and re-dealt
/// with a partition scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub synthetic: SyntheticConfig,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
}

/// Hidden layers of the classifier; empty means multinomial logistic regression.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_layers: Vec<usize>,
    pub hidden_activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopConfig {
    pub enabled: bool,
    pub window: usize,
    pub tolerance: f64,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            window: 20,
            tolerance: 0.005,
        }
    }
}

/// Replace both learned policies with fixed actions: uniform aggregation
/// weights and the same `(alpha, eta)` for every client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreezeConfig {
    pub alpha: usize,
    pub eta: f64,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn t_max() -> usize {
    1000
}
fn one() -> f64 {
    1.0
}
fn runs() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub algorithm: Algorithm,
    pub num_clients: usize,
    #[serde(default = "t_max")]
    pub t_max: usize,
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    /// Fixed local schedule of the baselines; FedProx also reads `prox_mu`.
    #[serde(default)]
    pub local_train: LocalTrainSpec,
    #[serde(default)]
    pub fedavg_weighting: Weighting,
    #[serde(default)]
    pub server_agent: DdpgHyper,
    #[serde(default)]
    pub client_agent: DdpgHyper,
    #[serde(default)]
    pub bounds: ActionBounds,
    #[serde(default = "one")]
    pub kappa_global: f64,
    #[serde(default = "one")]
    pub kappa_local: f64,
    #[serde(default)]
    pub stop: StopConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "runs")]
    pub runs: usize,
    #[serde(default)]
    pub freeze: Option<FreezeConfig>,
    /// Evaluate uploaded models on this many server test rows per round
    /// instead of all of them.
    #[serde(default)]
    pub server_eval_subsample: Option<usize>,
    /// Record per-round wall-clock time; off keeps output byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn nest(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{prefix}.{path}"), message),
        other => other,
    }
}

impl ExperimentConfig {
    /// Parse JSON, rejecting unknown keys and naming the offending path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config("schema_version", format!("expected {SCHEMA_VERSION}")));
        }
        if self.num_clients < 1 {
            return Err(Error::config("num_clients", "must be >= 1"));
        }
        if self.t_max < 1 {
            return Err(Error::config("t_max", "must be >= 1"));
        }
        if self.runs < 1 {
            return Err(Error::config("runs", "must be >= 1"));
        }
        self.data.synthetic.validate().map_err(|e| nest("data.synthetic", e))?;
        if self.data.synthetic.num_clients != self.num_clients {
            return Err(Error::config("data.synthetic.num_clients", "must equal num_clients"));
        }
        if let Some(p) = &self.data.partition {
            p.validate().map_err(|e| nest("data.partition", e))?;
        }
        if self.model.hidden_layers.contains(&0) {
            return Err(Error::config("model.hidden_layers", "layer sizes must be >= 1"));
        }
        self.local_train.validate().map_err(|e| nest("local_train", e))?;
        self.server_agent.validate().map_err(|e| nest("server_agent", e))?;
        self.client_agent.validate().map_err(|e| nest("client_agent", e))?;
        self.bounds.validate().map_err(|e| nest("bounds", e))?;
        for (key, v) in [("kappa_global", self.kappa_global), ("kappa_local", self.kappa_local)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        if self.stop.window < 2 {
            return Err(Error::config("stop.window", "must be >= 2"));
        }
        if !(self.stop.tolerance >= 0.0 && self.stop.tolerance.is_finite()) {
            return Err(Error::config("stop.tolerance", "must be finite and >= 0"));
        }
        if let Some(f) = &self.freeze {
            if !self.bounds.contains(f.alpha, f.eta) {
                return Err(Error::config("freeze", "frozen action must lie inside bounds"));
            }
        }
        if self.server_eval_subsample == Some(0) {
            return Err(Error::config("server_eval_subsample", "must be >= 1"));
        }
        Ok(())
    }

    /// Classifier architecture implied by the data and model settings.
    pub fn model_spec(&self) -> Result<MlpSpec> {
        let s = &self.data.synthetic;
        let mut sizes = vec![s.dims];
        sizes.extend(&self.model.hidden_layers);
        sizes.push(s.classes);
        MlpSpec::new(sizes, self.model.hidden_activation, OutputHead::SoftmaxLogits)
    }
}
