use super::preset::PipelinePreset;
use super::session::RestorationSession;
use crate::degrade::MaskBuffer;
use crate::error::Result;
use crate::imaging::ImageBuffer;
use crate::stages::{Stage, StageParams, StageRunner};

/// Automatic mode as a session: four commits with the preset's parameters.
///
/// Without a mask, a damage backend that needs one is replaced by the
/// identity so the remaining stages still run.
pub fn run_auto_session(
    img: &ImageBuffer,
    preset: &PipelinePreset,
    mask: Option<&MaskBuffer>,
    runner: &StageRunner,
) -> Result<RestorationSession> {
    let mut session = RestorationSession::create(img.clone(), preset.clone());
    for stage in Stage::ALL {
        let mut params = preset.params(stage).clone();
        let stage_mask = if stage == Stage::Damage { mask } else { None };
        if stage == Stage::Damage && stage_mask.is_none() && runner.requires_mask(&params).map_err(|e| e.in_stage(stage.name()))? {
            tracing::info!("no damage mask given; skipping the damage stage");
            params = StageParams {
                seed: params.seed,
                ..StageParams::for_backend("skip-damage")
            };
        }
        session.commit(runner, Some(&params), stage_mask)?;
    }
    Ok(session)
}

/// Runs all four stages without interaction and returns the final image.
pub fn run_auto(
    img: &ImageBuffer,
    preset: &PipelinePreset,
    mask: Option<&MaskBuffer>,
    runner: &StageRunner,
) -> Result<ImageBuffer> {
    let session = run_auto_session(img, preset, mask, runner)?;
    Ok(session.final_image().expect("all stages committed").clone())
}
