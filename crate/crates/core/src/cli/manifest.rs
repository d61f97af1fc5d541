use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::CliError;

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// Arguments after the program name; `replay` re-parses these.
    pub argv: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        params: &impl Serialize,
        seed: Option<u64>,
        inputs: &[&Path],
        outputs: &[&Path],
        argv: &[String],
    ) -> Self {
        let show = |p: &&Path| p.display().to_string();
        Self {
            command: command.to_string(),
            params: serde_json::to_value(params).expect("arguments serialize"),
            seed,
            inputs: inputs.iter().map(show).collect(),
            outputs: outputs.iter().map(show).collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            argv: argv.to_vec(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}
