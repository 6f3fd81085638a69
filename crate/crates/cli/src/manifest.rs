//! Run manifests: enough metadata to replay a run (seed, settings, file
//! inventory) and for downstream commands to find their inputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub class: String,
    pub individuals: usize,
    #[serde(default)]
    pub replicates: usize,
    #[serde(default)]
    pub chains: usize,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub parameter_names: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    pub duration_ms: u128,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {} (is this a run directory?)", path.display()))?;
        Ok(serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {}", path.display()))?)
    }
}
