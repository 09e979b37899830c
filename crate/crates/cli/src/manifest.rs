use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use crate::CliError;

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub resolved_config: serde_json::Value,
    pub version: String,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config_path: Option<&Path>, resolved_config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            resolved_config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started: now(),
            finished: String::new(),
        }
    }

    pub fn finish_into(mut self, dir: &Path) -> Result<(), CliError> {
        self.finished = now();
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::numerical(e.to_string()))?;
        crate::write_file(&dir.join("manifest.json"), &text)
    }
}
