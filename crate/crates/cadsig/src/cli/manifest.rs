//! Run manifests: every run directory records how it was produced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub timestamp_unix: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        seed: u64,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    /// Write `run_manifest.json` into the run directory.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join("run_manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(format!("manifest encode: {e}")))?;
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
