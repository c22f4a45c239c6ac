use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use oldphoto::pipeline::{PipelinePreset, SessionStatus};
use oldphoto::stages::BackendView;
use oldphoto::{Error, ImageBuffer, MaskBuffer, RestorationSession, Stage, StageParams};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{gone, AppState};

#[derive(Debug, Serialize, Deserialize)]
pub struct StageView {
    pub index: usize,
    pub name: Stage,
    pub committed: bool,
    pub backend_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Links {
    pub original: String,
    pub preview: String,
    pub commit: String,
    pub rollback: String,
    pub mask: String,
    pub result: String,
    /// Committed output of stage `k`: this prefix followed by `k`.
    pub stage_output: String,
}

/// Public state of a session. Never contains server paths.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub preset: String,
    pub status: SessionStatus,
    pub cursor: usize,
    pub current_stage: Option<Stage>,
    pub stages: Vec<StageView>,
    pub mask_pending: bool,
    pub width: u32,
    pub height: u32,
    pub links: Links,
}

impl SessionView {
    pub fn of(s: &RestorationSession) -> Self {
        let base = format!("/sessions/{}", s.id());
        Self {
            session_id: s.id().to_string(),
            preset: s.preset().name.clone(),
            status: s.status(),
            cursor: s.cursor(),
            current_stage: s.current_stage(),
            stages: Stage::ALL
                .iter()
                .map(|&stage| {
                    let commit = s.commits().get(stage.index());
                    StageView {
                        index: stage.index(),
                        name: stage,
                        committed: commit.is_some(),
                        backend_id: commit.map(|c| c.params.backend_id.clone()),
                    }
                })
                .collect(),
            mask_pending: s.pending_mask().is_some(),
            width: s.original().width(),
            height: s.original().height(),
            links: Links {
                original: format!("{base}/original"),
                preview: format!("{base}/preview"),
                commit: format!("{base}/commit"),
                rollback: format!("{base}/rollback"),
                mask: format!("{base}/mask"),
                result: format!("{base}/result"),
                stage_output: format!("{base}/stages/"),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateQuery {
    pub preset: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct BackendsQuery {
    pub stage: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RollbackRequest {
    pub to_stage: usize,
}

pub fn router(state: AppState) -> Router {
    let limit = state.max_body_bytes();
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/mask", post(upload_mask).delete(clear_mask))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/commit", post(commit))
        .route("/sessions/{id}/rollback", post(rollback))
        .route("/sessions/{id}/result", get(result))
        .route("/sessions/{id}/original", get(original))
        .route("/sessions/{id}/stages/{k}", get(stage_output))
        .route("/backends", get(list_backends))
        .route("/presets", get(list_presets))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

fn png(img: &ImageBuffer) -> Result<Response, ApiError> {
    let bytes = img.to_png_bytes()?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<Option<T>, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(None);
    }
    serde_json::from_slice(body)
        .map(Some)
        .map_err(|e| ApiError::invalid(format!("bad request body: {e}")))
}

async fn create_session(
    State(state): State<AppState>,
    Query(q): Query<CreateQuery>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    if body.is_empty() {
        return Err(ApiError::invalid("request body must be a PNG image"));
    }
    let preset: PipelinePreset = state
        .presets()
        .get(q.preset.as_deref().unwrap_or("default"))?
        .clone();
    let store = state.store().clone();
    let session = tokio::task::spawn_blocking(move || -> oldphoto::Result<RestorationSession> {
        let img = ImageBuffer::from_png_bytes(&body)?;
        let session = RestorationSession::create(img, preset);
        store.save(&session)?;
        Ok(session)
    })
    .await??;
    let view = SessionView::of(&session);
    tracing::info!(session = %view.session_id, preset = %view.preset, "session created");
    state.insert(session);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let guard = state.handle(&id).await?.read_owned().await;
    let s = guard.as_ref().ok_or_else(|| gone(&id))?;
    Ok(Json(SessionView::of(s)))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let mut guard = state.handle(&id).await?.write_owned().await;
    if guard.is_none() {
        return Err(gone(&id));
    }
    let store = state.store().clone();
    let owned = id.clone();
    tokio::task::spawn_blocking(move || store.remove(&owned)).await??;
    *guard = None;
    state.forget(&id);
    Ok(StatusCode::NO_CONTENT)
}

/// Runs `f` on the session under its write lock and persists the result.
/// The in-memory session is restored if saving fails.
async fn mutate<T: Send + 'static>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut RestorationSession) -> oldphoto::Result<T> + Send + 'static,
) -> Result<Json<SessionView>, ApiError> {
    let mut guard = state.handle(id).await?.write_owned().await;
    let store = state.store().clone();
    let owned = id.to_string();
    tokio::task::spawn_blocking(move || -> Result<Json<SessionView>, ApiError> {
        let session = guard.as_mut().ok_or_else(|| gone(&owned))?;
        let before = session.clone();
        f(session)?;
        if let Err(e) = store.save(session) {
            *session = before;
            return Err(e.into());
        }
        Ok(Json(SessionView::of(session)))
    })
    .await?
}

async fn upload_mask(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let mask = MaskBuffer::from_png_bytes(&body)?;
    mutate(&state, &id, move |s| s.set_mask(mask)).await
}

async fn clear_mask(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    mutate(&state, &id, |s| {
        s.clear_mask();
        Ok(())
    })
    .await
}

async fn preview(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let params: Option<StageParams> = parse_json(&body)?;
    // Shared lock: previews run concurrently but wait for an in-flight commit.
    let guard = state.handle(&id).await?.read_owned().await;
    let runner = state.clone();
    let img = tokio::task::spawn_blocking(move || -> Result<ImageBuffer, ApiError> {
        let s = guard.as_ref().ok_or_else(|| gone(&id))?;
        Ok(s.preview(runner.runner(), params.as_ref(), None)?)
    })
    .await??;
    png(&img)
}

async fn commit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let params: Option<StageParams> = parse_json(&body)?;
    let runner = state.clone();
    mutate(&state, &id, move |s| {
        let record = s.commit(runner.runner(), params.as_ref(), None)?;
        tracing::info!(stage = %record.stage, backend = %record.params.backend_id, "stage committed");
        Ok(())
    })
    .await
}

async fn rollback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: RollbackRequest = parse_json(&body)?.ok_or_else(|| ApiError::invalid("body must be {\"to_stage\": n}"))?;
    mutate(&state, &id, move |s| s.rollback(req.to_stage)).await
}

async fn read_image(
    state: &AppState,
    id: &str,
    pick: impl FnOnce(&RestorationSession) -> oldphoto::Result<ImageBuffer>,
) -> Result<Response, ApiError> {
    let guard = state.handle(id).await?.read_owned().await;
    let s = guard.as_ref().ok_or_else(|| gone(id))?;
    let img = pick(s)?;
    drop(guard);
    tokio::task::spawn_blocking(move || png(&img)).await?
}

async fn result(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    read_image(&state, &id, |s| {
        s.final_image()
            .cloned()
            .ok_or_else(|| Error::State(format!("session {} has {} of 4 stages committed", s.id(), s.cursor())))
    })
    .await
}

async fn original(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    read_image(&state, &id, |s| Ok(s.original().clone())).await
}

async fn stage_output(
    State(state): State<AppState>,
    Path((id, k)): Path<(String, usize)>,
) -> Result<Response, ApiError> {
    read_image(&state, &id, move |s| {
        s.commits()
            .get(k)
            .map(|c| c.output.clone())
            .ok_or_else(|| Error::Range(format!("stage {k} is not committed")))
    })
    .await
}

async fn list_backends(
    State(state): State<AppState>,
    Query(q): Query<BackendsQuery>,
) -> Result<Json<Vec<BackendView>>, ApiError> {
    let stage = q.stage.as_deref().map(str::parse::<Stage>).transpose()?;
    Ok(Json(state.runner().registry().list(stage).into_iter().map(|d| d.view()).collect()))
}

async fn list_presets(State(state): State<AppState>) -> Json<Vec<PipelinePreset>> {
    Json(
        state
            .presets()
            .names()
            .filter_map(|n| state.presets().get(n).ok().cloned())
            .collect(),
    )
}
