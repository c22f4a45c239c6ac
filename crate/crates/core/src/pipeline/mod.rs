//! Fixed-order restoration sessions: preview, commit ("Move"), rollback,
//! persistence, transcripts, and the non-interactive automatic mode.

mod auto;
mod preset;
mod session;
mod store;
mod transcript;

pub use auto::{run_auto, run_auto_session};
pub use preset::{PipelinePreset, PresetCatalog};
pub use session::{CommitRecord, RestorationSession, SessionStatus};
pub use store::SessionStore;
pub use transcript::{
    read_transcript, replay_transcript, verify_replay, write_transcript, TranscriptRecord, TRANSCRIPT_FILE,
};

pub(crate) fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
