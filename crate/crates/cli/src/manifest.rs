//! Run manifest: everything needed to re-run an experiment and to interpret
//! its outputs, written next to them as `manifest.json`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sqglab_core::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    /// The resolved run parameters needed to reload the trajectory.
    pub beta: f64,
    pub kappa: f64,
    pub drift: String,
    pub t_end: f64,
    pub grid: Vec<usize>,
    pub domain_length: Vec<f64>,
    pub snapshot_stride: usize,
    /// Full configuration text for reproduction.
    pub config_text: String,
}

pub fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
        std::fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest parse: {e}")))
    }
}
