use serde::{Deserialize, Serialize};

use super::preset::PipelinePreset;
use crate::degrade::MaskBuffer;
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;
use crate::stages::{Stage, StageParams, StageRunner};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Complete,
}

/// A committed stage: the exact parameters and mask used, and the output.
#[derive(Clone, Debug, PartialEq)]
pub struct CommitRecord {
    pub stage: Stage,
    pub params: StageParams,
    pub mask: Option<MaskBuffer>,
    pub output: ImageBuffer,
    /// Wall-clock time, excluded from determinism checks.
    pub committed_at_ms: u64,
}

/// Ordered stage history over an immutable original.
///
/// Commits exist for exactly the stages before the cursor and stage `k`
/// always consumes stage `k - 1`'s committed output.
#[derive(Clone, Debug, PartialEq)]
pub struct RestorationSession {
    id: String,
    original: ImageBuffer,
    preset: PipelinePreset,
    commits: Vec<CommitRecord>,
    pending_mask: Option<MaskBuffer>,
}

impl RestorationSession {
    pub fn create(original: ImageBuffer, preset: PipelinePreset) -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string(), original, preset)
    }

    pub fn with_id(id: String, original: ImageBuffer, preset: PipelinePreset) -> Self {
        Self {
            id,
            original,
            preset,
            commits: Vec::new(),
            pending_mask: None,
        }
    }

    pub(crate) fn restore_parts(
        id: String,
        original: ImageBuffer,
        preset: PipelinePreset,
        commits: Vec<CommitRecord>,
        pending_mask: Option<MaskBuffer>,
    ) -> Result<Self> {
        if commits.len() > Stage::ALL.len() {
            return Err(Error::Validation(format!("session {id} has {} commits", commits.len())));
        }
        for (i, c) in commits.iter().enumerate() {
            if c.stage.index() != i {
                return Err(Error::Validation(format!("session {id}: commit {i} is for stage {}", c.stage)));
            }
        }
        Ok(Self {
            id,
            original,
            preset,
            commits,
            pending_mask,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn original(&self) -> &ImageBuffer {
        &self.original
    }

    pub fn preset(&self) -> &PipelinePreset {
        &self.preset
    }

    pub fn commits(&self) -> &[CommitRecord] {
        &self.commits
    }

    /// Index of the next stage to commit, 0..=4.
    pub fn cursor(&self) -> usize {
        self.commits.len()
    }

    pub fn status(&self) -> SessionStatus {
        if self.cursor() == Stage::ALL.len() {
            SessionStatus::Complete
        } else {
            SessionStatus::Active
        }
    }

    pub fn current_stage(&self) -> Option<Stage> {
        Stage::from_index(self.cursor())
    }

    /// Input of the current stage.
    pub fn stage_input(&self) -> &ImageBuffer {
        self.commits.last().map_or(&self.original, |c| &c.output)
    }

    pub fn final_image(&self) -> Option<&ImageBuffer> {
        (self.status() == SessionStatus::Complete).then(|| self.stage_input())
    }

    pub fn pending_mask(&self) -> Option<&MaskBuffer> {
        self.pending_mask.as_ref()
    }

    /// Stores the damage mask used by later previews and the damage commit.
    pub fn set_mask(&mut self, mask: MaskBuffer) -> Result<()> {
        if self.cursor() > Stage::Damage.index() {
            return Err(Error::State("masks can only be set before the damage stage is committed".into()));
        }
        self.pending_mask = Some(mask);
        Ok(())
    }

    pub fn clear_mask(&mut self) {
        self.pending_mask = None;
    }

    fn active_stage(&self) -> Result<Stage> {
        self.current_stage()
            .ok_or_else(|| Error::State(format!("session {} is complete", self.id)))
    }

    fn effective_mask<'a>(&'a self, stage: Stage, mask: Option<&'a MaskBuffer>) -> Option<&'a MaskBuffer> {
        match mask {
            Some(m) => Some(m),
            None if stage == Stage::Damage => self.pending_mask.as_ref(),
            None => None,
        }
    }

    /// Candidate output of the current stage; the session is not touched.
    /// `params` defaults to the preset's entry for the stage.
    pub fn preview(
        &self,
        runner: &StageRunner,
        params: Option<&StageParams>,
        mask: Option<&MaskBuffer>,
    ) -> Result<ImageBuffer> {
        let stage = self.active_stage()?;
        let params = params.unwrap_or_else(|| self.preset.params(stage));
        runner.run(stage, self.stage_input(), params, self.effective_mask(stage, mask))
    }

    /// Runs the current stage like [`preview`](Self::preview), records it and advances.
    pub fn commit(
        &mut self,
        runner: &StageRunner,
        params: Option<&StageParams>,
        mask: Option<&MaskBuffer>,
    ) -> Result<&CommitRecord> {
        let stage = self.active_stage()?;
        let params = params.cloned().unwrap_or_else(|| self.preset.params(stage).clone());
        let mask = self.effective_mask(stage, mask).cloned();
        let output = runner.run(stage, self.stage_input(), &params, mask.as_ref())?;
        self.commits.push(CommitRecord {
            stage,
            params,
            mask,
            output,
            committed_at_ms: super::now_millis(),
        });
        Ok(self.commits.last().expect("just pushed"))
    }

    /// Discards commits at and after `to_stage`; the cursor becomes `to_stage`.
    pub fn rollback(&mut self, to_stage: usize) -> Result<()> {
        if to_stage > self.cursor() {
            return Err(Error::Range(format!(
                "cannot roll back to stage {to_stage}; cursor is {}",
                self.cursor()
            )));
        }
        self.commits.truncate(to_stage);
        Ok(())
    }
}
