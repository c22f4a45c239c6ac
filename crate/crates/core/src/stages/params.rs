use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Restoration stages in their fixed execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Damage,
    Denoise,
    Face,
    Colorize,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Damage, Stage::Denoise, Stage::Face, Stage::Colorize];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Damage => "damage",
            Stage::Denoise => "denoise",
            Stage::Face => "face",
            Stage::Colorize => "colorize",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::ALL.get(i).copied()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Lookup {
                kind: "stage",
                name: s.to_string(),
            })
    }
}

/// Parameters for one stage invocation.
///
/// `strength`, `steps` and `guidance` carry diffusion semantics for external
/// backends; reference backends map them onto classical filter settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageParams {
    pub backend_id: String,
    pub strength: f64,
    pub steps: u32,
    pub guidance: f64,
    /// Empty means the null prompt.
    pub prompt: String,
    pub checkpoint: String,
    pub upscale: u32,
    pub seed: u64,
    pub extras: BTreeMap<String, String>,
}

impl Default for StageParams {
    fn default() -> Self {
        Self {
            backend_id: String::new(),
            strength: 1.0,
            steps: 1,
            guidance: 0.0,
            prompt: String::new(),
            checkpoint: String::new(),
            upscale: 1,
            seed: 0,
            extras: BTreeMap::new(),
        }
    }
}

impl StageParams {
    pub fn for_backend(backend_id: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(Error::param(format!("strength must lie in [0, 1], got {}", self.strength)));
        }
        if self.steps < 1 {
            return Err(Error::param("steps must be >= 1"));
        }
        if !(self.guidance >= 0.0 && self.guidance.is_finite()) {
            return Err(Error::param(format!("guidance must be >= 0, got {}", self.guidance)));
        }
        if self.upscale < 1 {
            return Err(Error::param("upscale must be >= 1"));
        }
        if self.backend_id.is_empty() {
            return Err(Error::param("backend_id is empty"));
        }
        Ok(())
    }

    /// Sets one field from its textual form; unknown keys go to `extras`
    /// when prefixed with `extras.`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::param(format!("`{key}` expects a number, got `{value}`")))
        }
        match key {
            "backend_id" | "backend" => self.backend_id = value.to_string(),
            "strength" => self.strength = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "guidance" => self.guidance = num(key, value)?,
            "prompt" => self.prompt = value.to_string(),
            "checkpoint" => self.checkpoint = value.to_string(),
            "upscale" => self.upscale = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => match other.strip_prefix("extras.") {
                Some(extra) if !extra.is_empty() => {
                    self.extras.insert(extra.to_string(), value.to_string());
                }
                _ => return Err(Error::param(format!("unknown stage parameter `{other}`"))),
            },
        }
        Ok(())
    }

    pub fn extra(&self, key: &str) -> Option<&str> {
        self.extras.get(key).map(String::as_str)
    }
}
