//! Flat `key = value` experiment configuration files.
//!
//! One key per line; blank lines and `#` comments are ignored. Every key is
//! optional and defaults to the 20-node reference scenario; unknown or
//! duplicate keys are errors that name the offending line.

use std::collections::BTreeSet;

use dqalms_core::simkit::{Resolution, ScenarioConfig};

use crate::CmdError;

/// Parsed configuration: the scenario plus CLI-level knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct FileConfig {
    pub scenario: ScenarioConfig,
    /// Neighborhood size used by the complexity table of `analyze`.
    pub complexity_neighbors: usize,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::reference(),
            complexity_neighbors: 3,
        }
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CmdError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CmdError::Usage(format!("config line {line_no}: expected `key = value`, got {raw:?}"))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(CmdError::Usage(format!(
                    "config line {line_no}: duplicate key `{key}`"
                )));
            }
            let fail = |what: &str| {
                CmdError::Usage(format!(
                    "config line {line_no}: key `{key}` needs {what}, got {value:?}"
                ))
            };
            match key {
                "n_nodes" => cfg.scenario.n_nodes = value.parse().map_err(|_| fail("an integer"))?,
                "filter_len" => {
                    cfg.scenario.filter_len = value.parse().map_err(|_| fail("an integer"))?
                }
                "mu" => cfg.scenario.mu = value.parse().map_err(|_| fail("a number"))?,
                "trials" => cfg.scenario.trials = value.parse().map_err(|_| fail("an integer"))?,
                "iterations" => {
                    cfg.scenario.iterations = value.parse().map_err(|_| fail("an integer"))?
                }
                "seed" => cfg.scenario.seed = value.parse().map_err(|_| fail("an integer"))?,
                "topology_radius" => {
                    cfg.scenario.topology_radius = value.parse().map_err(|_| fail("a number"))?
                }
                "bandwidth_hz" => {
                    cfg.scenario.bandwidth_hz = value.parse().map_err(|_| fail("a number"))?
                }
                "conversion_energy_j" => {
                    cfg.scenario.conversion_energy_j =
                        value.parse().map_err(|_| fail("a number"))?
                }
                "bit_depths" => {
                    let depths: Result<Vec<Resolution>, _> =
                        value.split(',').map(Resolution::parse).collect();
                    cfg.scenario.bit_depths = depths.map_err(|e| {
                        CmdError::Usage(format!("config line {line_no}: key `bit_depths`: {e}"))
                    })?;
                }
                "complexity_neighbors" => {
                    cfg.complexity_neighbors = value.parse().map_err(|_| fail("an integer"))?
                }
                _ => {
                    return Err(CmdError::Usage(format!(
                        "config line {line_no}: unknown key `{key}`"
                    )))
                }
            }
        }
        cfg.scenario
            .validate()
            .map_err(|e| CmdError::Usage(format!("invalid configuration: {e}")))?;
        if cfg.complexity_neighbors == 0 {
            return Err(CmdError::Usage(
                "invalid configuration: complexity_neighbors must be >= 1".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CmdError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CmdError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Serialize back to config syntax; parsing the result reproduces the
    /// configuration exactly.
    pub fn to_config_text(&self) -> String {
        let s = &self.scenario;
        let bits: Vec<String> = s.bit_depths.iter().map(ToString::to_string).collect();
        format!(
            "n_nodes = {}\nfilter_len = {}\nmu = {}\ntrials = {}\niterations = {}\n\
             bit_depths = {}\nseed = {}\ntopology_radius = {}\nbandwidth_hz = {}\n\
             conversion_energy_j = {}\ncomplexity_neighbors = {}\n",
            s.n_nodes,
            s.filter_len,
            s.mu,
            s.trials,
            s.iterations,
            bits.join(", "),
            s.seed,
            s.topology_radius,
            s.bandwidth_hz,
            s.conversion_energy_j,
            self.complexity_neighbors,
        )
    }
}
