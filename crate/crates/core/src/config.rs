//! Run configuration files: a world, classifier settings, a tick budget and
//! optionally a saved runtime state to resume from (a snapshot).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};
use crate::metrics::ClassifierConfig;
use crate::world::{World, WorldConfig, WorldState};

pub const CONFIG_VERSION: u32 = 1;

/// About 120 simulated seconds at the default 22 ms tick.
pub const DEFAULT_TICKS: u64 = 5455;

fn default_ticks() -> u64 {
    DEFAULT_TICKS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub world: WorldConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default = "default_ticks")]
    pub ticks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<WorldState>,
}

impl RunConfig {
    pub fn new(world: WorldConfig) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            world,
            classifier: ClassifierConfig::default(),
            ticks: DEFAULT_TICKS,
            state: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| SwarmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(SwarmError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.world.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SwarmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Fresh world from the configuration, or the saved state if present.
    pub fn build_world(&self) -> Result<World> {
        match &self.state {
            Some(state) => World::from_state(self.world.clone(), state.clone()),
            None => World::init(self.world.clone()),
        }
    }

    /// Captures a running world as a resumable configuration.
    pub fn snapshot(world: &World, classifier: ClassifierConfig) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            world: world.config().clone(),
            classifier,
            ticks: DEFAULT_TICKS,
            state: Some(world.state()),
        }
    }
}
