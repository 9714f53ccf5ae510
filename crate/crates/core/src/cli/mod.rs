//! Batch experiment driver: config loading, experiment execution, CSV/SVG
//! emission, run manifests, and the randomized validation suite.

use std::fs;
use std::path::Path;

use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod manifest;
mod svg;
pub mod table;
pub mod validate;

use crate::dynamics::{IntegrateError, OracleError};
use crate::model::{DomainError, ParamError};
pub use config::{load_config, load_validate_settings, ExperimentKind, RunConfig, ValidateSettings};
pub use manifest::{RunManifest, MANIFEST_FILE};

/// Driver-level failure. Every variant renders as a machine-readable JSON
/// record on stderr with a stable `error` kind.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Config {
        /// 1-based config line the error was detected on, when known.
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Io(String),
    #[error("{failed} of {total} validation properties failed: {names}")]
    ValidationFailed { failed: usize, total: usize, names: String },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Domain(_) => "domain",
            CliError::Param(_) => "param",
            CliError::Integrate(_) => "integrate",
            CliError::Oracle(_) => "oracle",
            CliError::Io(_) => "io",
            CliError::ValidationFailed { .. } => "validate",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn json_record(&self) -> String {
        let mut rec = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
        });
        if let CliError::Config { line: Some(line), .. } = self {
            rec["line"] = serde_json::json!(line);
        }
        rec.to_string()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

/// Executes the configured experiment and writes its outputs plus a
/// `manifest.json` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let outputs = experiments::execute(cfg)?;
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", cfg.out_dir.display())))?;
    let mut man = RunManifest::new(cfg.experiment.kind().config_name(), cfg.render_resolved());
    for f in &outputs {
        write_file(&cfg.out_dir.join(&f.name), &f.bytes)?;
        man.record(&f.name, &f.bytes);
    }
    write_file(&cfg.out_dir.join(MANIFEST_FILE), man.to_json().as_bytes())?;
    Ok(man)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_are_stable_and_json_parses() {
        let e = CliError::Config { line: Some(3), message: "bad key".to_string() };
        assert_eq!(e.kind(), "config");
        let v: serde_json::Value = serde_json::from_str(&e.json_record()).unwrap();
        assert_eq!(v["error"], "config");
        assert_eq!(v["line"], 3);
        assert_eq!(v["message"], "bad key");

        let d = CliError::Domain(DomainError::BelowThreshold(0.5));
        let v: serde_json::Value = serde_json::from_str(&d.json_record()).unwrap();
        assert_eq!(v["error"], "domain");
        assert!(v.get("line").is_none());
    }
}
