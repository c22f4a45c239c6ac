use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::preset::PipelinePreset;
use super::session::{CommitRecord, RestorationSession};
use crate::degrade::MaskBuffer;
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;
use crate::stages::{Stage, StageParams, StageRunner};

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub(crate) const ORIGINAL_FILE: &str = "original.png";

/// One committed stage. File references are relative to the transcript's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub stage: Stage,
    pub backend_id: String,
    pub params: StageParams,
    pub mask: Option<String>,
    pub output: String,
    pub seed: u64,
    pub committed_at_ms: u64,
}

pub(crate) fn stage_output_name(stage: Stage) -> String {
    format!("stage{}_{}.png", stage.index(), stage.name())
}

pub(crate) fn stage_mask_name(stage: Stage) -> String {
    format!("stage{}_{}_mask.png", stage.index(), stage.name())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes the original, every committed output and mask, and the transcript
/// into the directory containing `path`. Returns the transcript path.
pub fn write_transcript(session: &RestorationSession, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let original = dir.join(ORIGINAL_FILE);
    if !original.is_file() {
        session.original().save(&original)?;
    }
    let mut text = String::new();
    for commit in session.commits() {
        let output = stage_output_name(commit.stage);
        commit.output.save(dir.join(&output))?;
        let mask = match &commit.mask {
            Some(m) => {
                let name = stage_mask_name(commit.stage);
                m.save(dir.join(&name))?;
                Some(name)
            }
            None => None,
        };
        let record = TranscriptRecord {
            stage: commit.stage,
            backend_id: commit.params.backend_id.clone(),
            params: commit.params.clone(),
            mask,
            output,
            seed: commit.params.seed,
            committed_at_ms: commit.committed_at_ms,
        };
        text.push_str(&serde_json::to_string(&record).expect("record serializes"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    Ok(path.to_path_buf())
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Vec<TranscriptRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Input(format!("{}: {e}", path.display()))))
        .collect()
}

/// Rebuilds committed records from files without re-running any stage.
pub(crate) fn load_commits(dir: &Path, records: &[TranscriptRecord]) -> Result<Vec<CommitRecord>> {
    records
        .iter()
        .map(|r| {
            Ok(CommitRecord {
                stage: r.stage,
                params: r.params.clone(),
                mask: r.mask.as_ref().map(|m| MaskBuffer::load(dir.join(m))).transpose()?,
                output: ImageBuffer::load(dir.join(&r.output))?,
                committed_at_ms: r.committed_at_ms,
            })
        })
        .collect()
}

/// Re-executes every recorded stage from the original with the recorded
/// parameters and masks.
pub fn replay_transcript(path: impl AsRef<Path>, runner: &StageRunner) -> Result<RestorationSession> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let records = read_transcript(path)?;
    let original = ImageBuffer::load(dir.join(ORIGINAL_FILE))?;
    let mut preset = PipelinePreset::default_preset();
    preset.name = "transcript".into();
    for r in &records {
        *preset.params_mut(r.stage) = r.params.clone();
    }
    let mut session = RestorationSession::create(original, preset);
    for r in &records {
        if session.current_stage() != Some(r.stage) {
            return Err(Error::Validation(format!("transcript out of order at stage {}", r.stage)));
        }
        let mask = r.mask.as_ref().map(|m| MaskBuffer::load(dir.join(m))).transpose()?;
        session.commit(runner, Some(&r.params), mask.as_ref())?;
    }
    Ok(session)
}

/// Replays and checks every stage output against the recorded file, bit for bit.
pub fn verify_replay(path: impl AsRef<Path>, runner: &StageRunner) -> Result<RestorationSession> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let records = read_transcript(path)?;
    let session = replay_transcript(path, runner)?;
    for (r, commit) in records.iter().zip(session.commits()) {
        let recorded = ImageBuffer::load(dir.join(&r.output))?;
        if recorded != commit.output {
            return Err(Error::Validation(format!("replayed {} output differs from {}", r.stage, r.output)));
        }
    }
    Ok(session)
}
