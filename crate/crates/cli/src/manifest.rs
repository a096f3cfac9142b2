//! Run manifests: what produced an artifact, and a digest that names it.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use pals_core::io::sha256_hex;
use serde::Serialize;

pub const TOOL_VERSION: &str = concat!("pals ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Canonical command: subcommand plus the parameters that change results.
    pub command: String,
    pub digest: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<PathBuf>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    /// Starts a manifest. The digest covers the command, config hash, seeds
    /// and tool version, never paths or times, so identical runs share it.
    pub fn start(command: String, config_hash: &str, seeds: Vec<u64>) -> Self {
        let seed_text: Vec<String> = seeds.iter().map(u64::to_string).collect();
        let canonical = format!(
            "{TOOL_VERSION}\n{command}\nconfig_hash={config_hash}\nseeds={}\n",
            seed_text.join(",")
        );
        Self {
            digest: sha256_hex(canonical.as_bytes()),
            command,
            config_hash: config_hash.to_string(),
            seeds,
            tool_version: TOOL_VERSION.to_string(),
            started_unix_s: now(),
            finished_unix_s: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn finish(&mut self) {
        self.finished_unix_s = now();
    }

    /// Header entries for CSV artifacts; deliberately free of timestamps.
    pub fn csv_header(&self) -> Vec<(String, String)> {
        vec![
            ("tool".into(), self.tool_version.clone()),
            ("command".into(), self.command.clone()),
            ("digest".into(), self.digest.clone()),
            ("config_hash".into(), self.config_hash.clone()),
        ]
    }
}
