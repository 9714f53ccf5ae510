//! Run manifests: the resolved configuration plus checksums of every file a
//! run produced. Feeding a manifest back through `--config` re-executes the
//! run and reproduces the checksums.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cli::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Checksummed output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to re-execute and verify a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Experiment name, or "Validate" for the invariant suite.
    pub experiment: String,
    /// Wall-clock at write time (informational; not covered by determinism).
    pub created_unix_ms: u64,
    /// Canonical config text with all defaults materialized.
    pub resolved_config: String,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn new(experiment: &str, resolved_config: String) -> Self {
        Self {
            tool: "wgm-rotor".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            resolved_config,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, file: &str, bytes: &[u8]) {
        self.outputs.push(OutputRecord {
            file: file.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config {
            line: None,
            message: format!("not a valid run manifest: {e}"),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// True when the text looks like a manifest rather than a config file.
pub fn looks_like_manifest(text: &str) -> bool {
    text.trim_start().starts_with('{')
}
