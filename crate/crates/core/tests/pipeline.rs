use oldphoto::degrade::generate_crack_mask;
use oldphoto::imaging::gray_to_rgb;
use oldphoto::pipeline::{
    read_transcript, run_auto, run_auto_session, verify_replay, write_transcript, SessionStatus, SessionStore,
};
use oldphoto::{DegradationRecipe, Error, ImageBuffer, MaskBuffer, PipelinePreset, RestorationSession, SeededRng, Stage, StageRunner};

fn photo() -> ImageBuffer {
    ImageBuffer::from_fn(48, 40, 1, |x, y, _| (40 + x * 3 + y * 2) as u8).unwrap()
}

fn crack_mask(w: u32, h: u32, seed: u64) -> MaskBuffer {
    let recipe = DegradationRecipe {
        crack_count_range: oldphoto::degrade::Span(2, 2),
        ..DegradationRecipe::default()
    };
    generate_crack_mask(w, h, &recipe, &mut SeededRng::new(seed)).unwrap().0
}

#[test]
fn auto_equals_fold_of_commits() {
    let runner = StageRunner::default();
    let preset = PipelinePreset::default_preset();
    let img = photo();
    let mask = crack_mask(48, 40, 3);
    let auto = run_auto(&img, &preset, Some(&mask), &runner).unwrap();

    let mut session = RestorationSession::create(img.clone(), preset.clone());
    session.set_mask(mask.clone()).unwrap();
    for stage in Stage::ALL {
        session.commit(&runner, Some(preset.params(stage)), None).unwrap();
    }
    assert_eq!(session.final_image().unwrap(), &auto);
    assert_eq!(auto.dimensions(), (96, 80));
    assert_eq!(auto.channels(), 3);
}

#[test]
fn auto_without_mask_skips_damage() {
    let runner = StageRunner::default();
    let session = run_auto_session(&photo(), &PipelinePreset::default_preset(), None, &runner).unwrap();
    assert_eq!(session.commits()[0].params.backend_id, "skip-damage");
    assert_eq!(session.commits()[0].output, photo());
}

#[test]
fn identity_preset_is_passthrough() {
    let runner = StageRunner::default();
    let img = photo();
    let out = run_auto(&img, &PipelinePreset::identity(), None, &runner).unwrap();
    assert_eq!(out, gray_to_rgb(&img));
}

#[test]
fn transcript_replays_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let runner = StageRunner::default();
    let session = run_auto_session(&photo(), &PipelinePreset::default_preset(), Some(&crack_mask(48, 40, 9)), &runner).unwrap();
    let path = write_transcript(&session, dir.path().join("transcript.jsonl")).unwrap();
    let records = read_transcript(&path).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records[0].mask.is_some() && records[1].mask.is_none());
    let replayed = verify_replay(&path, &runner).unwrap();
    assert_eq!(replayed.final_image(), session.final_image());

    // Tampering with a recorded output is detected.
    ImageBuffer::filled(96, 80, 3, 0).unwrap().save(dir.path().join(&records[3].output)).unwrap();
    assert!(matches!(verify_replay(&path, &runner), Err(Error::Validation(_))));
}

#[test]
fn store_round_trip_and_rollback_cleanup() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let runner = StageRunner::default();
    let mut session = RestorationSession::create(photo(), PipelinePreset::default_preset());
    let mask = crack_mask(48, 40, 1);
    session.set_mask(mask.clone()).unwrap();
    store.save(&session).unwrap();
    let loaded = store.load(session.id()).unwrap();
    assert_eq!(loaded, session);

    session.commit(&runner, None, None).unwrap();
    session.commit(&runner, None, None).unwrap();
    store.save(&session).unwrap();
    let loaded = store.load(session.id()).unwrap();
    assert_eq!(loaded.cursor(), 2);
    assert_eq!(loaded.commits(), session.commits());

    session.rollback(1).unwrap();
    store.save(&session).unwrap();
    let loaded = store.load(session.id()).unwrap();
    assert_eq!(loaded.cursor(), 1);
    assert!(!dir.path().join(session.id()).join("stage1_denoise.png").exists());

    while loaded.status() == SessionStatus::Active && session.cursor() < 4 {
        session.commit(&runner, None, None).unwrap();
    }
    store.save(&session).unwrap();
    assert_eq!(store.load(session.id()).unwrap().status(), SessionStatus::Complete);
    assert_eq!(store.list().unwrap(), vec![session.id().to_string()]);
}

#[test]
fn store_lookup_errors_and_expiry() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    assert!(matches!(store.load("missing"), Err(Error::Lookup { .. })));
    assert!(matches!(store.load("../etc"), Err(Error::Lookup { .. })));
    let session = RestorationSession::create(photo(), PipelinePreset::identity());
    store.save(&session).unwrap();
    assert!(store.expired(std::time::Duration::from_secs(3600)).unwrap().is_empty());
    std::thread::sleep(std::time::Duration::from_millis(20));
    assert_eq!(store.expired(std::time::Duration::from_millis(5)).unwrap(), vec![session.id().to_string()]);
    store.remove(session.id()).unwrap();
    assert!(!store.exists(session.id()));
}
