use std::time::{SystemTime, UNIX_EPOCH};

use page_core::orchestrator::ExperimentConfig;
use serde::{Deserialize, Serialize};

/// Record of one `run` invocation, written once at the end.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn version_string() -> String {
    format!("page {}", env!("CARGO_PKG_VERSION"))
}
