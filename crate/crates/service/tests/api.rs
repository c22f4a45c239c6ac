use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use oldphoto::pipeline::{PresetCatalog, SessionStore};
use oldphoto::{BackendDescriptor, BackendRegistry, ImageBuffer, MaskBuffer, Stage, StageParams, StageRunner};
use oldphoto_service::{router, AppState, ServiceConfig, SessionView};
use serde_json::Value;
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|_| panic!("not JSON: {}", String::from_utf8_lossy(&self.body)))
    }

    fn view(&self) -> SessionView {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        body,
    }
}

fn photo_png() -> Vec<u8> {
    ImageBuffer::from_fn(32, 24, 1, |x, y, _| (50 + x * 3 + y * 2) as u8)
        .unwrap()
        .to_png_bytes()
        .unwrap()
}

fn app_in(dir: &std::path::Path) -> Router {
    router(AppState::new(&ServiceConfig::new(dir)).unwrap())
}

async fn create(app: &Router, preset: &str) -> String {
    let r = call(app, "POST", &format!("/sessions?preset={preset}"), photo_png()).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    r.view().session_id
}

fn params_json(p: &StageParams) -> Vec<u8> {
    serde_json::to_vec(p).unwrap()
}

#[tokio::test]
async fn create_then_get() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let r = call(&app, "POST", "/sessions", photo_png()).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let view = r.view();
    assert_eq!(view.cursor, 0);
    assert_eq!(view.preset, "default");
    assert_eq!(view.current_stage, Some(Stage::Damage));
    assert!(!r.body.windows(4).any(|w| w == b"/tmp"));

    let r = call(&app, "GET", &format!("/sessions/{}", view.session_id), vec![]).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.view().session_id, view.session_id);
    let r = call(&app, "GET", &view.links.original, vec![]).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("image/png"));
    assert_eq!(ImageBuffer::from_png_bytes(&r.body).unwrap(), ImageBuffer::from_png_bytes(&photo_png()).unwrap());
}

#[tokio::test]
async fn bad_uploads_and_unknown_preset() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    assert_eq!(call(&app, "POST", "/sessions", vec![]).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(call(&app, "POST", "/sessions", b"nope".to_vec()).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = call(&app, "POST", "/sessions?preset=missing", photo_png()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["code"], "unknown_name");
}

#[tokio::test]
async fn four_commits_then_result_then_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let id = create(&app, "identity").await;
    let r = call(&app, "GET", &format!("/sessions/{id}/result"), vec![]).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    for k in 0..4 {
        let r = call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
        assert_eq!(r.status, StatusCode::OK);
        assert_eq!(r.view().cursor, k + 1);
    }
    let r = call(&app, "GET", &format!("/sessions/{id}/result"), vec![]).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("image/png"));
    let out = ImageBuffer::from_png_bytes(&r.body).unwrap();
    assert_eq!(out.channels(), 3);

    let r = call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    let body = r.json();
    assert_eq!(body["code"], "state");
    assert!(body["message"].as_str().unwrap().contains("complete"));
    let r = call(&app, "POST", &format!("/sessions/{id}/preview"), vec![]).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    for (method, path) in [
        ("GET", "/sessions/abc"),
        ("POST", "/sessions/abc/commit"),
        ("POST", "/sessions/abc/preview"),
        ("GET", "/sessions/abc/result"),
        ("DELETE", "/sessions/abc"),
        ("GET", "/sessions/..%2Fetc"),
    ] {
        let r = call(&app, method, path, vec![]).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{method} {path}");
        assert_eq!(r.json()["code"], "not_found");
    }
}

#[tokio::test]
async fn preview_with_mismatched_mask_is_422() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let id = create(&app, "default").await;
    let wrong = MaskBuffer::from_fn(10, 10, |x, _| x < 3).to_png_bytes().unwrap();
    assert_eq!(call(&app, "POST", &format!("/sessions/{id}/mask"), wrong).await.status, StatusCode::OK);
    let r = call(&app, "POST", &format!("/sessions/{id}/preview"), vec![]).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let body = r.json();
    assert_eq!(body["code"], "shape");
    assert_eq!(body["stage"], "damage");
    let r = call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}"), vec![]).await.view().cursor, 0);

    // A correctly sized mask lets the inpainting backend run.
    let good = MaskBuffer::from_fn(32, 24, |x, y| x == y).to_png_bytes().unwrap();
    assert_eq!(call(&app, "POST", &format!("/sessions/{id}/mask"), good).await.status, StatusCode::OK);
    let r = call(&app, "POST", &format!("/sessions/{id}/preview"), vec![]).await;
    assert_eq!(r.status, StatusCode::OK);
    let r = call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    assert_eq!(r.status, StatusCode::OK);

    // Masks are locked once the damage stage is committed.
    let again = MaskBuffer::empty(32, 24).to_png_bytes().unwrap();
    assert_eq!(call(&app, "POST", &format!("/sessions/{id}/mask"), again).await.status, StatusCode::CONFLICT);
    let not_a_mask = ImageBuffer::filled(32, 24, 1, 7).unwrap().to_png_bytes().unwrap();
    let r = call(&app, "POST", &format!("/sessions/{id}/mask"), not_a_mask).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn invalid_params_are_422() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let id = create(&app, "identity").await;
    let commit = format!("/sessions/{id}/commit");
    for body in [
        br#"{"backend_id": "skip-damage", "bogus": 1}"#.to_vec(),
        br#"{"backend_id": "skip-damage", "strength": "high"}"#.to_vec(),
        br#"not json"#.to_vec(),
        params_json(&StageParams::for_backend("reference-face")),
        params_json(&StageParams::for_backend("no-such-backend")),
        params_json(&StageParams::for_backend("")),
    ] {
        let r = call(&app, "POST", &commit, body.clone()).await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{}", String::from_utf8_lossy(&body));
    }
    let mut p = StageParams::for_backend("skip-damage");
    p.strength = 2.0;
    assert_eq!(call(&app, "POST", &commit, params_json(&p)).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    // The default inpainting backend needs a mask.
    let r = call(&app, "POST", &commit, params_json(&StageParams::for_backend("reference-inpaint"))).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["stage"], "damage");
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}"), vec![]).await.view().cursor, 0);
}

#[tokio::test]
async fn rollback_semantics() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let id = create(&app, "identity").await;
    for _ in 0..3 {
        call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    }
    let rb = format!("/sessions/{id}/rollback");
    let r = call(&app, "POST", &rb, br#"{"to_stage": 4}"#.to_vec()).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["code"], "range");
    assert_eq!(call(&app, "POST", &rb, vec![]).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = call(&app, "POST", &rb, br#"{"to_stage": 1}"#.to_vec()).await;
    assert_eq!(r.status, StatusCode::OK);
    let view = r.view();
    assert_eq!(view.cursor, 1);
    assert!(view.stages[0].committed && !view.stages[1].committed);
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/stages/0"), vec![]).await.status, StatusCode::OK);
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/stages/1"), vec![]).await.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn preview_does_not_advance() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let id = create(&app, "identity").await;
    call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    let mut p = StageParams::for_backend("reference-denoise");
    p.strength = 0.01;
    p.steps = 50;
    let r = call(&app, "POST", &format!("/sessions/{id}/preview"), params_json(&p)).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("image/png"));
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}"), vec![]).await.view().cursor, 1);
}

fn failing_app(dir: &std::path::Path) -> Router {
    let mut registry = BackendRegistry::with_reference_backends();
    registry
        .register(BackendDescriptor::external(
            "broken",
            Stage::Denoise,
            "sh -c 'echo CUDA out of memory >&2; exit 3'",
        ))
        .unwrap();
    registry
        .register(BackendDescriptor::external("hang", Stage::Denoise, "sleep 5"))
        .unwrap();
    let runner = StageRunner::new(registry)
        .with_workdir_root(dir.join("work"))
        .with_external_timeout(Duration::from_millis(300));
    let config = ServiceConfig::new(dir.join("sessions"));
    router(AppState::from_parts(
        SessionStore::open(&config.sessions_dir).unwrap(),
        runner,
        PresetCatalog::builtin(),
        &config,
    ))
}

#[tokio::test]
async fn external_failure_is_502_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let app = failing_app(dir.path());
    let id = create(&app, "identity").await;
    call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    let r = call(
        &app,
        "POST",
        &format!("/sessions/{id}/commit"),
        params_json(&StageParams::for_backend("broken")),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_GATEWAY);
    let body = r.json();
    assert_eq!(body["code"], "backend_failure");
    assert_eq!(body["stage"], "denoise");
    assert!(body["diagnostics"].as_str().unwrap().contains("CUDA out of memory"));

    let r = call(
        &app,
        "POST",
        &format!("/sessions/{id}/preview"),
        params_json(&StageParams::for_backend("hang")),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_GATEWAY);
    assert_eq!(r.json()["code"], "backend_timeout");
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}"), vec![]).await.view().cursor, 1);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = app_in(dir.path());
        let id = create(&app, "default").await;
        let mask = MaskBuffer::from_fn(32, 24, |x, _| x == 5).to_png_bytes().unwrap();
        call(&app, "POST", &format!("/sessions/{id}/mask"), mask).await;
        call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
        call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
        id
    };
    let app = app_in(dir.path());
    let r = call(&app, "GET", &format!("/sessions/{id}"), vec![]).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.view().cursor, 2);
    assert!(r.view().mask_pending);
    for _ in 0..2 {
        assert_eq!(call(&app, "POST", &format!("/sessions/{id}/commit"), vec![]).await.status, StatusCode::OK);
    }
    let out = ImageBuffer::from_png_bytes(&call(&app, "GET", &format!("/sessions/{id}/result"), vec![]).await.body).unwrap();
    assert_eq!(out.dimensions(), (64, 48));
}

async fn scripted_run(app: &Router) -> Vec<u8> {
    let id = create(app, "default").await;
    let mask = MaskBuffer::from_fn(32, 24, |x, y| (x + y) % 9 == 0).to_png_bytes().unwrap();
    call(app, "POST", &format!("/sessions/{id}/mask"), mask).await;
    call(app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    let mut p = StageParams::for_backend("reference-denoise");
    p.strength = 0.08;
    p.steps = 50;
    call(app, "POST", &format!("/sessions/{id}/commit"), params_json(&p)).await;
    call(app, "POST", &format!("/sessions/{id}/rollback"), br#"{"to_stage": 1}"#.to_vec()).await;
    p.strength = 0.02;
    call(app, "POST", &format!("/sessions/{id}/commit"), params_json(&p)).await;
    call(app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    call(app, "POST", &format!("/sessions/{id}/commit"), vec![]).await;
    let r = call(app, "GET", &format!("/sessions/{id}/result"), vec![]).await;
    assert_eq!(r.status, StatusCode::OK);
    r.body
}

#[tokio::test]
async fn replayed_call_sequence_reproduces_result() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = scripted_run(&app_in(a.path())).await;
    let second = scripted_run(&app_in(b.path())).await;
    assert_eq!(first, second);
}

#[tokio::test]
async fn backend_listing() {
    let dir = tempfile::tempdir().unwrap();
    let app = failing_app(dir.path());
    let r = call(&app, "GET", "/backends", vec![]).await;
    assert_eq!(r.status, StatusCode::OK);
    let all = r.json();
    assert!(all.as_array().unwrap().len() >= 10);
    assert!(!String::from_utf8_lossy(&r.body).contains("CUDA"), "command lines must stay private");
    let r = call(&app, "GET", "/backends?stage=denoise", vec![]).await;
    let ids: Vec<String> = r.json().as_array().unwrap().iter().map(|v| v["backend_id"].as_str().unwrap().to_string()).collect();
    assert!(ids.contains(&"broken".to_string()) && ids.contains(&"reference-denoise".to_string()));
    assert!(r.json().as_array().unwrap().iter().all(|v| v["stage"] == "denoise"));
    assert_eq!(call(&app, "GET", "/backends?stage=sharpen", vec![]).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = call(&app, "GET", "/presets", vec![]).await;
    assert!(r.json().as_array().unwrap().iter().any(|p| p["name"] == "identity"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn delete_and_gc() {
    let dir = tempfile::tempdir().unwrap();
    let mut registry = BackendRegistry::with_reference_backends();
    registry
        .register(BackendDescriptor::external("hang", Stage::Damage, "sleep 5"))
        .unwrap();
    let runner = StageRunner::new(registry).with_external_timeout(Duration::from_millis(800));
    let mut config = ServiceConfig::new(dir.path());
    config.session_max_age = Duration::from_millis(50);
    let state = AppState::from_parts(SessionStore::open(dir.path()).unwrap(), runner, PresetCatalog::builtin(), &config);
    let app = router(state.clone());
    let deleted = create(&app, "identity").await;
    let busy = create(&app, "identity").await;
    let idle = create(&app, "identity").await;
    assert_eq!(call(&app, "DELETE", &format!("/sessions/{deleted}"), vec![]).await.status, StatusCode::NO_CONTENT);
    assert_eq!(call(&app, "GET", &format!("/sessions/{deleted}"), vec![]).await.status, StatusCode::NOT_FOUND);

    tokio::time::sleep(Duration::from_millis(120)).await;
    let in_flight = {
        let app = app.clone();
        let uri = format!("/sessions/{busy}/preview");
        tokio::spawn(async move { call(&app, "POST", &uri, params_json(&StageParams::for_backend("hang"))).await })
    };
    tokio::time::sleep(Duration::from_millis(200)).await;
    let removed = state.collect_garbage().await;
    assert_eq!(removed, vec![idle.clone()]);
    assert_eq!(call(&app, "GET", &format!("/sessions/{idle}"), vec![]).await.status, StatusCode::NOT_FOUND);
    assert_eq!(in_flight.await.unwrap().status, StatusCode::BAD_GATEWAY);
    assert_eq!(state.collect_garbage().await, vec![busy]);
}
