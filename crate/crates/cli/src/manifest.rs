use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

/// Reproducibility record written next to a run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct RunRecorder {
    subcommand: String,
    config: serde_json::Value,
    seed: Option<u64>,
    started_unix: u64,
}

impl RunRecorder {
    pub fn start(subcommand: &str, config: &impl Serialize, seed: Option<u64>) -> anyhow::Result<Self> {
        Ok(RunRecorder {
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            started_unix: now(),
        })
    }

    /// Writes `<first output>.manifest.json`. Does nothing when every output went
    /// to stdout.
    pub fn finish(self, outputs: &[Option<&Path>]) -> anyhow::Result<Option<PathBuf>> {
        let outputs: Vec<PathBuf> = outputs.iter().flatten().map(|p| p.to_path_buf()).collect();
        let Some(first) = outputs.first() else {
            return Ok(None);
        };
        let mut name = first.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = first.with_file_name(name);
        let manifest = RunManifest {
            subcommand: self.subcommand,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started_unix,
            finished_unix: now(),
            outputs,
        };
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(Some(path))
    }
}
