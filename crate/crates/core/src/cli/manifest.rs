use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// Provenance block attached to every report so a run can be repeated from
/// the artifact alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// The parsed command-line flags.
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, parameters: &P, seed: Option<u64>) -> Self {
        Self {
            command: command.to_owned(),
            parameters: serde_json::to_value(parameters).unwrap_or(serde_json::Value::Null),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: timestamp(),
        }
    }

    /// Where the manifest of a CSV artifact at `path` is written.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_sidecar(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(Self::sidecar_path(path), json + "\n")
    }
}

// SOURCE_DATE_EPOCH pins the clock for byte-identical reruns.
fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    pinned.unwrap_or_else(Utc::now).to_rfc3339_opts(SecondsFormat::Secs, true)
}
