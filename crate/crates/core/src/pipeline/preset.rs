use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stages::{Stage, StageParams};

/// One parameter set per stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelinePreset {
    pub name: String,
    pub damage: StageParams,
    pub denoise: StageParams,
    pub face: StageParams,
    pub colorize: StageParams,
}

fn params(backend: &str, f: impl FnOnce(&mut StageParams)) -> StageParams {
    let mut p = StageParams::for_backend(backend);
    f(&mut p);
    p
}

impl PipelinePreset {
    /// Evaluated defaults: null prompt, strength 1.0, 30 steps, guidance 1.0
    /// for damage removal; "4K, DSLR", strength 0.008, 50 steps, guidance 3.0
    /// for denoising; GFP-GAN v1.3 tag with 2x upscale; DDColor "modelscope".
    /// Reference backends stand in for the models.
    pub fn default_preset() -> Self {
        Self {
            name: "default".into(),
            damage: params("reference-inpaint", |p| {
                p.prompt = String::new();
                p.strength = 1.0;
                p.steps = 30;
                p.guidance = 1.0;
            }),
            denoise: params("reference-denoise", |p| {
                p.prompt = "4K, DSLR".into();
                p.strength = 0.008;
                p.steps = 50;
                p.guidance = 3.0;
            }),
            face: params("reference-face", |p| {
                p.checkpoint = "v1.3".into();
                p.upscale = 2;
                p.strength = 0.5;
            }),
            colorize: params("reference-colorize", |p| {
                p.checkpoint = "modelscope".into();
            }),
        }
    }

    /// Same as [`default_preset`](Self::default_preset) but with the 0.08
    /// denoise strength quoted for the architecture.
    pub fn denoise_alternate() -> Self {
        let mut p = Self::default_preset();
        p.name = "default-denoise-0.08".into();
        p.denoise.strength = 0.08;
        p
    }

    /// Default parameters routed to external model backends with the
    /// conventional ids `sd-inpaint`, `sd-denoise`, `gfpgan` and `ddcolor`.
    pub fn default_external() -> Self {
        let mut p = Self::default_preset();
        p.name = "default-external".into();
        p.damage.backend_id = "sd-inpaint".into();
        p.denoise.backend_id = "sd-denoise".into();
        p.face.backend_id = "gfpgan".into();
        p.colorize.backend_id = "ddcolor".into();
        p
    }

    /// Zero-effect preset: output equals input up to 1 -> 3 channel expansion.
    pub fn identity() -> Self {
        Self {
            name: "identity".into(),
            damage: StageParams::for_backend("skip-damage"),
            denoise: params("reference-denoise", |p| p.strength = 0.0),
            face: params("reference-face", |p| p.strength = 0.0),
            colorize: StageParams::for_backend("reference-colorize"),
        }
    }

    pub fn params(&self, stage: Stage) -> &StageParams {
        match stage {
            Stage::Damage => &self.damage,
            Stage::Denoise => &self.denoise,
            Stage::Face => &self.face,
            Stage::Colorize => &self.colorize,
        }
    }

    pub fn params_mut(&mut self, stage: Stage) -> &mut StageParams {
        match stage {
            Stage::Damage => &mut self.damage,
            Stage::Denoise => &mut self.denoise,
            Stage::Face => &mut self.face,
            Stage::Colorize => &mut self.colorize,
        }
    }

    /// Applies a `stage.key=value` override, e.g. `denoise.strength=0.08`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::param(format!("override `{assignment}` is not key=value")))?;
        let (stage, key) = path
            .split_once('.')
            .ok_or_else(|| Error::param(format!("override key `{path}` must look like stage.key")))?;
        self.params_mut(stage.parse()?).set(key, value)
    }

    pub fn validate(&self) -> Result<()> {
        for stage in Stage::ALL {
            self.params(stage).validate().map_err(|e| e.in_stage(stage.name()))?;
        }
        Ok(())
    }
}

/// Named presets loaded from a JSON array, layered over the built-ins.
#[derive(Clone, Debug)]
pub struct PresetCatalog {
    presets: BTreeMap<String, PipelinePreset>,
}

impl Default for PresetCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PresetCatalog {
    pub fn builtin() -> Self {
        let presets = [
            PipelinePreset::default_preset(),
            PipelinePreset::denoise_alternate(),
            PipelinePreset::default_external(),
            PipelinePreset::identity(),
        ]
        .into_iter()
        .map(|p| (p.name.clone(), p))
        .collect();
        Self { presets }
    }

    /// Built-ins plus every preset in `path`; file entries replace built-ins of the same name.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let list: Vec<PipelinePreset> =
            serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let mut catalog = Self::builtin();
        for p in list {
            p.validate()?;
            catalog.presets.insert(p.name.clone(), p);
        }
        Ok(catalog)
    }

    pub fn get(&self, name: &str) -> Result<&PipelinePreset> {
        self.presets.get(name).ok_or_else(|| Error::Lookup {
            kind: "preset",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.presets.keys().map(String::as_str)
    }
}
