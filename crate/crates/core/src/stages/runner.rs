use std::path::PathBuf;
use std::time::Duration;

use super::registry::{BackendImpl, ReferenceAlgorithm};
use super::{
    colorize_reference, denoise_reference, face_restore_reference, inpaint_reference, run_external_backend,
    BackendRegistry, Stage, StageParams,
};
use crate::degrade::MaskBuffer;
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(300);

/// Resolves backends and executes single stages.
#[derive(Clone, Debug)]
pub struct StageRunner {
    registry: BackendRegistry,
    workdir_root: PathBuf,
    external_timeout: Duration,
    keep_workdirs: bool,
}

impl Default for StageRunner {
    fn default() -> Self {
        Self::new(BackendRegistry::with_reference_backends())
    }
}

impl StageRunner {
    pub fn new(registry: BackendRegistry) -> Self {
        Self {
            registry,
            workdir_root: std::env::temp_dir(),
            external_timeout: DEFAULT_EXTERNAL_TIMEOUT,
            keep_workdirs: false,
        }
    }

    pub fn with_workdir_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.workdir_root = root.into();
        self
    }

    pub fn with_external_timeout(mut self, timeout: Duration) -> Self {
        self.external_timeout = timeout;
        self
    }

    /// Leave external workdirs on disk for debugging.
    pub fn keep_workdirs(mut self, keep: bool) -> Self {
        self.keep_workdirs = keep;
        self
    }

    pub fn registry(&self) -> &BackendRegistry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut BackendRegistry {
        &mut self.registry
    }

    /// Whether the backend named in `params` needs a mask to do anything.
    pub fn requires_mask(&self, params: &StageParams) -> Result<bool> {
        Ok(self.registry.resolve(&params.backend_id)?.requires_mask)
    }

    /// Runs `stage` on `input`. Errors are tagged with the stage name.
    pub fn run(
        &self,
        stage: Stage,
        input: &ImageBuffer,
        params: &StageParams,
        mask: Option<&MaskBuffer>,
    ) -> Result<ImageBuffer> {
        self.run_untagged(stage, input, params, mask)
            .map_err(|e| e.in_stage(stage.name()))
    }

    fn run_untagged(
        &self,
        stage: Stage,
        input: &ImageBuffer,
        params: &StageParams,
        mask: Option<&MaskBuffer>,
    ) -> Result<ImageBuffer> {
        params.validate()?;
        let descriptor = self.registry.resolve(&params.backend_id)?;
        if descriptor.stage != stage {
            return Err(Error::param(format!(
                "backend `{}` serves the {} stage, not {stage}",
                descriptor.backend_id, descriptor.stage
            )));
        }
        if let Some(m) = mask {
            if stage != Stage::Damage {
                return Err(Error::param(format!("masks are only accepted at the damage stage, not {stage}")));
            }
            m.ensure_matches(input)?;
        }
        if descriptor.requires_mask && mask.is_none() {
            return Err(Error::param(format!("backend `{}` requires a mask", descriptor.backend_id)));
        }

        match &descriptor.implementation {
            BackendImpl::Reference { algorithm } => match algorithm {
                ReferenceAlgorithm::Inpaint => inpaint_reference(input, mask.expect("checked above"), params),
                ReferenceAlgorithm::Denoise => denoise_reference(input, params),
                ReferenceAlgorithm::Face => face_restore_reference(input, params),
                ReferenceAlgorithm::Colorize => colorize_reference(input, params),
                ReferenceAlgorithm::Skip => Ok(input.clone()),
            },
            BackendImpl::External { .. } => {
                std::fs::create_dir_all(&self.workdir_root).map_err(|e| Error::io(&self.workdir_root, e))?;
                let dir = tempfile::Builder::new()
                    .prefix(&format!("{}-", stage.name()))
                    .tempdir_in(&self.workdir_root)
                    .map_err(|e| Error::io(&self.workdir_root, e))?;
                let result = run_external_backend(descriptor, input, mask, params, dir.path(), self.external_timeout);
                if self.keep_workdirs {
                    let kept = dir.keep();
                    tracing::info!(workdir = %kept.display(), "kept external workdir");
                }
                result
            }
        }
    }
}
