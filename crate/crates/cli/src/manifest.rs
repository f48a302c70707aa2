//! Run manifests: a JSON record of what produced the artifacts in an
//! output directory. Re-running with the embedded configuration (also
//! written as `resolved.conf`) reproduces the CSV outputs byte for byte.

use std::path::Path;

use serde::Serialize;

use crate::CmdError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Library version that produced the outputs.
    pub version: String,
    /// Subcommand name.
    pub command: String,
    /// Scenario seed in effect (after any `--seed` override).
    pub seed: u64,
    /// Resolved configuration in config-file syntax.
    pub config: String,
    /// Files written alongside this manifest.
    pub artifacts: Vec<String>,
    /// Wall-clock runtime in seconds.
    pub elapsed_seconds: f64,
    /// Set when any learning curve tripped the divergence guard.
    pub diverged: bool,
}

/// Write a file atomically: to a temporary sibling first, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CmdError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| CmdError::Internal(format!("writing {}: {e}", path.display())))
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CmdError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CmdError::Internal(format!("serializing manifest: {e}")))?;
        write_atomic(&dir.join("manifest.json"), &json)
    }
}
