use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Stage;
use crate::error::{Error, Result};

/// Built-in classical algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceAlgorithm {
    Inpaint,
    Denoise,
    Face,
    Colorize,
    /// Identity on any stage.
    Skip,
}

impl ReferenceAlgorithm {
    fn native_stage(self) -> Option<Stage> {
        match self {
            Self::Inpaint => Some(Stage::Damage),
            Self::Denoise => Some(Stage::Denoise),
            Self::Face => Some(Stage::Face),
            Self::Colorize => Some(Stage::Colorize),
            Self::Skip => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendImpl {
    Reference {
        algorithm: ReferenceAlgorithm,
    },
    External {
        /// Program and arguments; `{input}`, `{mask}`, `{output}`, `{params}`
        /// and `{workdir}` are substituted per call.
        command_template: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub stage: Stage,
    #[serde(flatten)]
    pub implementation: BackendImpl,
    /// StageParams keys the backend honours.
    #[serde(default)]
    pub accepted_params: Vec<String>,
    #[serde(default)]
    pub requires_mask: bool,
}

/// What the HTTP API reveals about a backend (no command lines).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendView {
    pub backend_id: String,
    pub stage: Stage,
    pub kind: String,
    pub accepted_params: Vec<String>,
    pub requires_mask: bool,
}

impl BackendDescriptor {
    pub fn reference(backend_id: &str, stage: Stage, algorithm: ReferenceAlgorithm, accepted: &[&str]) -> Self {
        Self {
            backend_id: backend_id.to_string(),
            stage,
            implementation: BackendImpl::Reference { algorithm },
            accepted_params: accepted.iter().map(|s| s.to_string()).collect(),
            requires_mask: algorithm == ReferenceAlgorithm::Inpaint,
        }
    }

    pub fn external(backend_id: &str, stage: Stage, command_template: &str) -> Self {
        Self {
            backend_id: backend_id.to_string(),
            stage,
            implementation: BackendImpl::External {
                command_template: command_template.to_string(),
                timeout_secs: None,
            },
            accepted_params: ["strength", "steps", "guidance", "prompt", "checkpoint", "upscale", "seed"]
                .map(String::from)
                .to_vec(),
            requires_mask: false,
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self.implementation, BackendImpl::External { .. })
    }

    pub fn view(&self) -> BackendView {
        BackendView {
            backend_id: self.backend_id.clone(),
            stage: self.stage,
            kind: if self.is_external() { "external" } else { "reference" }.into(),
            accepted_params: self.accepted_params.clone(),
            requires_mask: self.requires_mask,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.backend_id.trim().is_empty() {
            return Err(Error::param("backend_id is empty"));
        }
        match &self.implementation {
            BackendImpl::External { command_template, timeout_secs } => {
                if command_template.trim().is_empty() {
                    return Err(Error::param(format!(
                        "external backend `{}` has an empty command_template",
                        self.backend_id
                    )));
                }
                if timeout_secs.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
                    return Err(Error::param("timeout_secs must be > 0"));
                }
            }
            BackendImpl::Reference { algorithm } => {
                if algorithm.native_stage().is_some_and(|s| s != self.stage) {
                    return Err(Error::param(format!(
                        "reference algorithm {algorithm:?} cannot serve the {} stage",
                        self.stage
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Backends keyed by unique id.
#[derive(Clone, Debug, Default)]
pub struct BackendRegistry {
    backends: BTreeMap<String, BackendDescriptor>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry with the reference and skip backends for every stage.
    pub fn with_reference_backends() -> Self {
        use ReferenceAlgorithm::*;
        let mut reg = Self::empty();
        let builtins = [
            BackendDescriptor::reference("reference-inpaint", Stage::Damage, Inpaint, &["strength", "steps"]),
            BackendDescriptor::reference(
                "reference-denoise",
                Stage::Denoise,
                Denoise,
                &["strength", "steps", "extras.auto_steps", "extras.steps_per_sigma"],
            ),
            BackendDescriptor::reference("reference-face", Stage::Face, Face, &["strength", "upscale"]),
            BackendDescriptor::reference("reference-colorize", Stage::Colorize, Colorize, &["extras.mode"]),
        ];
        for d in builtins {
            reg.register(d).expect("builtin ids are unique");
        }
        for stage in Stage::ALL {
            reg.register(BackendDescriptor::reference(&format!("skip-{stage}"), stage, Skip, &[]))
                .expect("builtin ids are unique");
        }
        reg
    }

    pub fn register(&mut self, descriptor: BackendDescriptor) -> Result<()> {
        descriptor.validate()?;
        if self.backends.contains_key(&descriptor.backend_id) {
            return Err(Error::Duplicate {
                kind: "backend",
                name: descriptor.backend_id,
            });
        }
        self.backends.insert(descriptor.backend_id.clone(), descriptor);
        Ok(())
    }

    pub fn resolve(&self, backend_id: &str) -> Result<&BackendDescriptor> {
        self.backends.get(backend_id).ok_or_else(|| Error::Lookup {
            kind: "backend",
            name: backend_id.to_string(),
        })
    }

    /// Backends for `stage` (all stages when `None`), ordered by id.
    pub fn list(&self, stage: Option<Stage>) -> Vec<&BackendDescriptor> {
        self.backends
            .values()
            .filter(|d| stage.is_none_or(|s| d.stage == s))
            .collect()
    }

    /// Reads a JSON array of descriptors.
    pub fn load_descriptors(path: impl AsRef<Path>) -> Result<Vec<BackendDescriptor>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn register_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        for d in Self::load_descriptors(path)? {
            self.register(d)?;
        }
        Ok(())
    }
}
