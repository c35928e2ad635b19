use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use alpf_core::engine::{RoundMetrics, TrainingJob};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::api::{AnswerRequest, CreateSession, Health, MetricsView, SessionSummary, SessionView};
use crate::error::{ServiceError, ServiceResult};
use crate::session::Session;
use crate::store;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Where session directories live.
    pub session_dir: PathBuf,
    /// Base directory for `{"dir": ...}` dataset references.
    pub data_root: PathBuf,
    /// Allowed browser origin; `None` allows any.
    pub cors_origin: Option<String>,
}

#[derive(Clone)]
struct Snapshot {
    view: SessionView,
    history: Vec<RoundMetrics>,
}

/// A session behind its single-writer lock, plus the last published
/// snapshot so reads never wait on a writer.
struct Handle {
    core: Mutex<Session>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl Handle {
    fn new(session: Session) -> Arc<Self> {
        let snapshot = Snapshot {
            view: session.view(),
            history: session.history(),
        };
        Arc::new(Self {
            core: Mutex::new(session),
            snapshot: RwLock::new(Arc::new(snapshot)),
        })
    }

    // Called with the core lock held so snapshots are published in order.
    fn publish(&self, session: &Session) {
        let snapshot = Snapshot {
            view: session.view(),
            history: session.history(),
        };
        *self.snapshot.write().expect("snapshot lock") = Arc::new(snapshot);
    }

    fn read(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock"))
    }
}

struct Inner {
    cfg: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
    next_id: AtomicU64,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Opens the session directory, replaying every session found there.
    /// Sessions that fail to load are skipped with a warning.
    pub async fn open(cfg: ServiceConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(&cfg.session_dir)?;
        let (dirs, next) = store::scan(&cfg.session_dir)?;
        let state = Self {
            inner: Arc::new(Inner {
                cfg,
                sessions: RwLock::new(HashMap::new()),
                next_id: AtomicU64::new(next),
            }),
        };
        for dir in dirs {
            let data_root = state.inner.cfg.data_root.clone();
            let path = dir.clone();
            let loaded = tokio::task::spawn_blocking(move || Session::load(&path, &data_root))
                .await
                .map_err(std::io::Error::other)?;
            match loaded {
                Ok((session, job)) => {
                    let id = session.id().to_string();
                    let handle = Handle::new(session);
                    state.sessions_mut().insert(id.clone(), Arc::clone(&handle));
                    if let Some(job) = job {
                        spawn_training(handle, job);
                    }
                    tracing::info!(session = %id, "restored session");
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipping session"),
            }
        }
        Ok(state)
    }

    fn sessions_mut(&self) -> std::sync::RwLockWriteGuard<'_, HashMap<String, Arc<Handle>>> {
        self.inner.sessions.write().expect("session map lock")
    }

    fn get(&self, id: &str) -> ServiceResult<Arc<Handle>> {
        self.inner
            .sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("session map lock").len()
    }
}

// Runs re-trainings for one session until it no longer needs one.
fn spawn_training(handle: Arc<Handle>, job: TrainingJob) {
    tokio::task::spawn_blocking(move || {
        let mut job = job;
        loop {
            let result = job.run();
            let mut session = handle.core.lock().expect("session lock");
            let next = match result {
                Ok(clf) => session.install(clf),
                Err(e) => Err(ServiceError::internal(e)),
            };
            match next {
                Ok(Some(more)) => {
                    handle.publish(&session);
                    job = more;
                }
                Ok(None) => {
                    handle.publish(&session);
                    break;
                }
                Err(e) => {
                    tracing::error!(session = %session.id(), error = %e, "re-training failed");
                    session.fail(e.to_string());
                    handle.publish(&session);
                    break;
                }
            }
        }
    });
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ServiceResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        sessions: state.session_count(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> ServiceResult<(StatusCode, Json<SessionView>)> {
    let request = body(payload)?;
    let id = store::session_id(state.inner.next_id.fetch_add(1, Ordering::SeqCst));
    let root = state.inner.cfg.session_dir.clone();
    let data_root = state.inner.cfg.data_root.clone();
    let (session, job) =
        tokio::task::spawn_blocking(move || Session::create(&root, id, &request, &data_root))
            .await
            .map_err(ServiceError::internal)??;
    let view = session.view();
    let handle = Handle::new(session);
    state
        .sessions_mut()
        .insert(view.id.clone(), Arc::clone(&handle));
    if let Some(job) = job {
        spawn_training(handle, job);
    }
    tracing::info!(session = %view.id, "created session");
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<SessionSummary>> {
    let handles: Vec<Arc<Handle>> = state
        .inner
        .sessions
        .read()
        .expect("session map lock")
        .values()
        .cloned()
        .collect();
    let mut out: Vec<SessionSummary> = handles
        .iter()
        .map(|h| {
            let s = h.read();
            SessionSummary {
                id: s.view.id.clone(),
                status: s.view.status,
                questions_asked: s.view.progress.questions_asked,
            }
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn get_question(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<Json<SessionView>> {
    Ok(Json(state.get(&id)?.read().view.clone()))
}

async fn submit_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<AnswerRequest>, JsonRejection>,
) -> ServiceResult<Json<SessionView>> {
    let request = body(payload)?;
    let handle = state.get(&id)?;
    let worker = Arc::clone(&handle);
    let (view, job) = tokio::task::spawn_blocking(move || -> ServiceResult<_> {
        let mut session = worker.core.lock().expect("session lock");
        let job = session.submit(request.question_id, request.answer.into())?;
        worker.publish(&session);
        Ok((session.view(), job))
    })
    .await
    .map_err(ServiceError::internal)??;
    if let Some(job) = job {
        spawn_training(handle, job);
    }
    Ok(Json(view))
}

async fn get_metrics(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<Json<MetricsView>> {
    let snapshot = state.get(&id)?.read();
    Ok(Json(MetricsView {
        id: snapshot.view.id.clone(),
        status: snapshot.view.status,
        progress: snapshot.view.progress.clone(),
        history: snapshot.history.clone(),
    }))
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let allow = match origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(v) => AllowOrigin::exact(v),
        None => AllowOrigin::any(),
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(state: AppState) -> Router {
    let layer = cors(state.inner.cfg.cors_origin.as_deref());
    Router::new()
        .route("/healthz", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/question", get(get_question))
        .route("/sessions/{id}/answer", post(submit_answer))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .layer(layer)
        .with_state(state)
}
