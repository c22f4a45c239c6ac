use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use oldphoto::pipeline::{PresetCatalog, SessionStore};
use oldphoto::stages::DEFAULT_EXTERNAL_TIMEOUT;
use oldphoto::{BackendRegistry, Error, RestorationSession, StageRunner};
use tokio::sync::RwLock;

use crate::error::ApiError;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub sessions_dir: PathBuf,
    /// JSON array of extra backend descriptors.
    pub backends_file: Option<PathBuf>,
    /// JSON array of presets layered over the built-in ones.
    pub presets_file: Option<PathBuf>,
    pub external_timeout: Duration,
    /// Workdirs for external backends; the system temp dir when unset.
    pub workdir_root: Option<PathBuf>,
    pub session_max_age: Duration,
    pub max_body_bytes: usize,
}

impl ServiceConfig {
    pub fn new(sessions_dir: impl Into<PathBuf>) -> Self {
        Self {
            sessions_dir: sessions_dir.into(),
            backends_file: None,
            presets_file: None,
            external_timeout: DEFAULT_EXTERNAL_TIMEOUT,
            workdir_root: None,
            session_max_age: Duration::from_secs(24 * 60 * 60),
            max_body_bytes: 64 * 1024 * 1024,
        }
    }
}

/// `None` once the session has been deleted while a request still held the handle.
pub(crate) type SessionHandle = Arc<RwLock<Option<RestorationSession>>>;

struct Inner {
    store: SessionStore,
    runner: StageRunner,
    presets: PresetCatalog,
    max_body_bytes: usize,
    session_max_age: Duration,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

/// Shared by all handlers. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> oldphoto::Result<Self> {
        let mut registry = BackendRegistry::with_reference_backends();
        if let Some(path) = &config.backends_file {
            registry.register_file(path)?;
        }
        let presets = match &config.presets_file {
            Some(path) => PresetCatalog::load(path)?,
            None => PresetCatalog::builtin(),
        };
        let mut runner = StageRunner::new(registry).with_external_timeout(config.external_timeout);
        if let Some(root) = &config.workdir_root {
            runner = runner.with_workdir_root(root);
        }
        Ok(Self::from_parts(
            SessionStore::open(&config.sessions_dir)?,
            runner,
            presets,
            config,
        ))
    }

    pub fn from_parts(store: SessionStore, runner: StageRunner, presets: PresetCatalog, config: &ServiceConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                store,
                runner,
                presets,
                max_body_bytes: config.max_body_bytes,
                session_max_age: config.session_max_age,
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn store(&self) -> &SessionStore {
        &self.inner.store
    }

    pub fn runner(&self) -> &StageRunner {
        &self.inner.runner
    }

    pub fn presets(&self) -> &PresetCatalog {
        &self.inner.presets
    }

    pub(crate) fn max_body_bytes(&self) -> usize {
        self.inner.max_body_bytes
    }

    pub(crate) fn insert(&self, session: RestorationSession) -> SessionHandle {
        let id = session.id().to_string();
        let handle = Arc::new(RwLock::new(Some(session)));
        self.inner.sessions.lock().unwrap().insert(id, handle.clone());
        handle
    }

    /// Cached handle, loading from disk on first use (e.g. after a restart).
    pub(crate) async fn handle(&self, id: &str) -> Result<SessionHandle, ApiError> {
        if let Some(h) = self.inner.sessions.lock().unwrap().get(id) {
            return Ok(h.clone());
        }
        let store = self.inner.store.clone();
        let owned = id.to_string();
        let session = tokio::task::spawn_blocking(move || store.load(&owned))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
        let mut map = self.inner.sessions.lock().unwrap();
        // Another request may have loaded it meanwhile.
        Ok(map
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(RwLock::new(Some(session))))
            .clone())
    }

    pub(crate) fn forget(&self, id: &str) {
        self.inner.sessions.lock().unwrap().remove(id);
    }

    /// Deletes sessions not saved within the configured max age. Sessions with
    /// a request in flight are left for the next round. Returns the removed ids.
    pub async fn collect_garbage(&self) -> Vec<String> {
        let store = self.inner.store.clone();
        let max_age = self.inner.session_max_age;
        let expired = match tokio::task::spawn_blocking(move || store.expired(max_age)).await {
            Ok(Ok(ids)) => ids,
            Ok(Err(e)) => {
                tracing::warn!("session gc: {e}");
                return Vec::new();
            }
            Err(e) => {
                tracing::warn!("session gc: {e}");
                return Vec::new();
            }
        };
        let mut removed = Vec::new();
        for id in expired {
            let handle = self.inner.sessions.lock().unwrap().get(&id).cloned();
            let guard = match &handle {
                Some(h) => match h.clone().try_write_owned() {
                    Ok(g) => Some(g),
                    Err(_) => continue,
                },
                None => None,
            };
            match self.inner.store.remove(&id) {
                Ok(()) => {
                    if let Some(mut g) = guard {
                        *g = None;
                    }
                    self.forget(&id);
                    tracing::info!(session = %id, "expired session removed");
                    removed.push(id);
                }
                Err(e) => tracing::warn!("session gc {id}: {e}"),
            }
        }
        removed
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        ApiError::internal(e.to_string())
    }
}

pub(crate) fn gone(id: &str) -> ApiError {
    Error::Lookup {
        kind: "session",
        name: id.to_string(),
    }
    .into()
}
