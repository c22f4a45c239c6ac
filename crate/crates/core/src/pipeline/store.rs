use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::preset::PipelinePreset;
use super::session::RestorationSession;
use super::transcript::{load_commits, read_transcript, write_atomic, write_transcript, ORIGINAL_FILE, TRANSCRIPT_FILE};
use crate::degrade::MaskBuffer;
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

const META_FILE: &str = "session.json";
const PENDING_MASK_FILE: &str = "mask.png";

#[derive(Serialize, Deserialize)]
struct SessionMeta {
    id: String,
    preset: PipelinePreset,
    updated_at_ms: u64,
}

/// One directory per session under `root`:
/// `original.png`, `session.json`, `mask.png` (pending), `transcript.jsonl`
/// and the committed stage outputs it references.
#[derive(Clone, Debug)]
pub struct SessionStore {
    root: PathBuf,
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::Lookup {
            kind: "session",
            name: id.to_string(),
        })
    }
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf> {
        check_id(id)?;
        Ok(self.root.join(id))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.dir(id).is_ok_and(|d| d.join(META_FILE).is_file())
    }

    pub fn save(&self, session: &RestorationSession) -> Result<()> {
        let dir = self.dir(session.id())?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let original = dir.join(ORIGINAL_FILE);
        if !original.is_file() {
            session.original().save(&original)?;
        }
        let pending = dir.join(PENDING_MASK_FILE);
        match session.pending_mask() {
            Some(m) => m.save(&pending)?,
            None if pending.exists() => fs::remove_file(&pending).map_err(|e| Error::io(&pending, e))?,
            None => {}
        }
        // Outputs of rolled-back stages.
        let keep: Vec<String> = session
            .commits()
            .iter()
            .map(|c| format!("stage{}_", c.stage.index()))
            .collect();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            if name.starts_with("stage") && !keep.iter().any(|k| name.starts_with(k)) {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        write_transcript(session, dir.join(TRANSCRIPT_FILE))?;
        let meta = SessionMeta {
            id: session.id().to_string(),
            preset: session.preset().clone(),
            updated_at_ms: super::now_millis(),
        };
        write_atomic(
            &dir.join(META_FILE),
            serde_json::to_string_pretty(&meta).expect("meta serializes").as_bytes(),
        )
    }

    pub fn load(&self, id: &str) -> Result<RestorationSession> {
        let dir = self.dir(id)?;
        let meta_path = dir.join(META_FILE);
        if !meta_path.is_file() {
            return Err(Error::Lookup {
                kind: "session",
                name: id.to_string(),
            });
        }
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: SessionMeta =
            serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", meta_path.display())))?;
        let original = ImageBuffer::load(dir.join(ORIGINAL_FILE))?;
        let transcript = dir.join(TRANSCRIPT_FILE);
        let records = if transcript.is_file() { read_transcript(&transcript)? } else { Vec::new() };
        let commits = load_commits(&dir, &records)?;
        let pending = dir.join(PENDING_MASK_FILE);
        let pending = pending.is_file().then(|| MaskBuffer::load(&pending)).transpose()?;
        RestorationSession::restore_parts(meta.id, original, meta.preset, commits, pending)
    }

    pub fn remove(&self, id: &str) -> Result<()> {
        let dir = self.dir(id)?;
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))? {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            if let Some(name) = entry.file_name().to_str() {
                if self.exists(name) {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Time since the session was last saved.
    pub fn age(&self, id: &str) -> Result<Duration> {
        let meta_path = self.dir(id)?.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: SessionMeta =
            serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", meta_path.display())))?;
        Ok(Duration::from_millis(super::now_millis().saturating_sub(meta.updated_at_ms)))
    }

    /// Ids of sessions not saved within `max_age`. The caller decides which to remove.
    pub fn expired(&self, max_age: Duration) -> Result<Vec<String>> {
        Ok(self
            .list()?
            .into_iter()
            .filter(|id| self.age(id).is_ok_and(|a| a > max_age))
            .collect())
    }
}
