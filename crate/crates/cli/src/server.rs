//! HTTP API for interactive editing.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | none | 201 `{"id": ...}` |
//! | GET | `/sessions/{id}` | none | session summary |
//! | PUT | `/sessions/{id}/inputs/{name}?kind=K` | PNG | artifact summary |
//! | POST | `/sessions/{id}/{op}` | JSON stage parameters | produced artifacts |
//! | GET | `/sessions/{id}/artifacts/{name}` | none | PNG or OBJ |
//!
//! A session replays its event log (uploads and stages) from `state_dir`
//! when first touched after a restart.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use relief_core::io::Depth;
use relief_core::pipeline::{Artifact, Artifacts, InputKind, Stage};
use relief_core::ReliefError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

const MANIFEST: &str = "session.json";
const MAX_UPLOAD: usize = 256 << 20;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message.to_string())
    }
}

/// Bad input is 400; an engine failure on valid input is 422.
impl From<ReliefError> for ApiError {
    fn from(e: ReliefError) -> Self {
        let status = match &e {
            e if e.is_validation() => StatusCode::BAD_REQUEST,
            ReliefError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Input {
        name: String,
        kind: InputKind,
        file: String,
        #[serde(default)]
        offsets: Option<String>,
    },
    Stage {
        stage: Stage,
    },
}

#[derive(Default)]
struct SessionData {
    artifacts: Artifacts,
    events: Vec<Event>,
}

struct Session {
    dir: PathBuf,
    solving: AtomicBool,
    data: Arc<tokio::sync::Mutex<SessionData>>,
}

impl Session {
    fn save(&self, events: &[Event]) -> ApiResult<()> {
        let text = serde_json::to_string_pretty(&json!({ "events": events })).map_err(ApiError::internal)?;
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        fs::write(&tmp, text).map_err(ApiError::internal)?;
        fs::rename(&tmp, self.dir.join(MANIFEST)).map_err(ApiError::internal)
    }
}

struct SolveGuard<'a>(&'a AtomicBool);

impl Drop for SolveGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

pub struct AppState {
    state_dir: PathBuf,
    sessions: Mutex<HashMap<Uuid, Arc<Session>>>,
}

impl AppState {
    pub fn new(state_dir: impl Into<PathBuf>) -> Self {
        AppState {
            state_dir: state_dir.into(),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    async fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        let id = Uuid::parse_str(id).map_err(|_| ApiError::not_found("no such session"))?;
        if let Some(s) = self.sessions.lock().unwrap().get(&id) {
            return Ok(s.clone());
        }
        let dir = self.state_dir.join(id.to_string());
        if !dir.join(MANIFEST).is_file() {
            return Err(ApiError::not_found("no such session"));
        }
        let replay_dir = dir.clone();
        let data = tokio::task::spawn_blocking(move || replay(&replay_dir))
            .await
            .map_err(ApiError::internal)??;
        let session = Arc::new(Session {
            dir,
            solving: AtomicBool::new(false),
            data: Arc::new(tokio::sync::Mutex::new(data)),
        });
        let mut sessions = self.sessions.lock().unwrap();
        Ok(sessions.entry(id).or_insert(session).clone())
    }
}

fn replay(dir: &Path) -> ApiResult<SessionData> {
    let text = fs::read_to_string(dir.join(MANIFEST)).map_err(ApiError::internal)?;
    let manifest: Value = serde_json::from_str(&text).map_err(ApiError::internal)?;
    let events: Vec<Event> = serde_json::from_value(manifest["events"].clone()).map_err(ApiError::internal)?;
    log::info!("replaying {} event(s) from {}", events.len(), dir.display());
    let mut artifacts = Artifacts::new();
    for event in &events {
        match event {
            Event::Input {
                name,
                kind,
                file,
                offsets,
            } => {
                let bytes = fs::read(dir.join(file)).map_err(ApiError::internal)?;
                artifacts.insert(name.clone(), Artifact::decode(*kind, &bytes, offsets.as_deref())?);
            }
            Event::Stage { stage } => stage.apply(&mut artifacts)?,
        }
    }
    Ok(SessionData { artifacts, events })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(describe_session))
        .route("/sessions/{id}/inputs/{name}", put(upload_input))
        .route("/sessions/{id}/artifacts/{name}", get(download_artifact))
        .route("/sessions/{id}/{op}", post(run_op))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

/// Serves until interrupted.
pub async fn serve(addr: std::net::SocketAddr, state_dir: PathBuf) -> anyhow::Result<()> {
    fs::create_dir_all(&state_dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(state_dir))))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn summary(name: &str, artifact: &Artifact) -> Value {
    let (width, height) = artifact.dims().map_or((None, None), |(w, h)| (Some(w), Some(h)));
    json!({
        "name": name,
        "kind": artifact.kind_name(),
        "media_type": artifact.media_type(),
        "width": width,
        "height": height,
    })
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

async fn create_session(State(state): State<Arc<AppState>>) -> ApiResult<(StatusCode, Json<Value>)> {
    let id = Uuid::new_v4();
    let dir = state.state_dir.join(id.to_string());
    fs::create_dir_all(dir.join("inputs")).map_err(ApiError::internal)?;
    let session = Arc::new(Session {
        dir,
        solving: AtomicBool::new(false),
        data: Default::default(),
    });
    session.save(&[])?;
    state.sessions.lock().unwrap().insert(id, session);
    Ok((StatusCode::CREATED, Json(json!({ "id": id.to_string() }))))
}

async fn describe_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let session = state.session(&id).await?;
    // Answer at once while an operation holds the session; artifacts are then null.
    let artifacts = session.data.try_lock().ok().map(|data| {
        data.artifacts
            .names()
            .map(|n| summary(n, data.artifacts.get(n).unwrap()))
            .collect::<Vec<_>>()
    });
    Ok(Json(json!({
        "id": id,
        "solving": session.solving.load(Ordering::Acquire),
        "artifacts": artifacts,
    })))
}

#[derive(Deserialize)]
struct UploadQuery {
    kind: InputKind,
    /// JSON label→offset map, for `labels` uploads.
    offsets: Option<String>,
}

async fn upload_input(
    State(state): State<Arc<AppState>>,
    UrlPath((id, name)): UrlPath<(String, String)>,
    Query(query): Query<UploadQuery>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    if !valid_name(&name) {
        return Err(ApiError::bad_request("artifact names use letters, digits, '_' and '-'"));
    }
    if query.offsets.is_some() && query.kind != InputKind::Labels {
        return Err(ApiError::bad_request("offsets only apply to labels"));
    }
    let session = state.session(&id).await?;
    let mut data = session.data.clone().lock_owned().await;
    let (kind, offsets) = (query.kind, query.offsets.clone());
    let decode_body = body.clone();
    let artifact = tokio::task::spawn_blocking(move || Artifact::decode(kind, &decode_body, offsets.as_deref()))
        .await
        .map_err(ApiError::internal)??;

    let file = format!("inputs/{}-{name}.png", data.events.len());
    fs::write(session.dir.join(&file), &body).map_err(ApiError::internal)?;
    let mut events = data.events.clone();
    events.push(Event::Input {
        name: name.clone(),
        kind,
        file,
        offsets: query.offsets,
    });
    session.save(&events)?;
    let reply = summary(&name, &artifact);
    data.artifacts.insert(name, artifact);
    data.events = events;
    Ok(Json(reply))
}

async fn run_op(
    State(state): State<Arc<AppState>>,
    UrlPath((id, op)): UrlPath<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let mut params: Value = if body.iter().all(u8::is_ascii_whitespace) {
        json!({})
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("body: {e}")))?
    };
    let Some(fields) = params.as_object_mut() else {
        return Err(ApiError::bad_request("body must be a JSON object"));
    };
    fields.insert("op".into(), Value::String(op.clone()));
    let stage: Stage = serde_json::from_value(params).map_err(|e| ApiError::bad_request(format!("{op}: {e}")))?;
    stage.validate()?;

    let session = state.session(&id).await?;
    let solving = matches!(stage, Stage::Solve { .. });
    let _guard = if solving {
        if session.solving.swap(true, Ordering::AcqRel) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "a solve is already running in this session",
            ));
        }
        Some(SolveGuard(&session.solving))
    } else {
        None
    };

    let mut stages = vec![stage];
    if let Stage::Solve { output, .. } = stages[0].clone() {
        // The editor shows the mesh and a preview after every solve.
        stages.push(Stage::Mesh {
            input: output.clone(),
            xy_scale: 1.0,
            output: "mesh".into(),
        });
        stages.push(Stage::Preview {
            input: output,
            output: "preview".into(),
        });
    }

    let mut data = session.data.clone().lock_owned().await;
    let mut artifacts = data.artifacts.clone();
    let run = stages.clone();
    let artifacts = tokio::task::spawn_blocking(move || -> Result<Artifacts, ReliefError> {
        for stage in &run {
            stage.apply(&mut artifacts)?;
        }
        Ok(artifacts)
    })
    .await
    .map_err(ApiError::internal)??;

    let mut events = data.events.clone();
    events.extend(stages.iter().cloned().map(|stage| Event::Stage { stage }));
    session.save(&events)?;
    let produced: Vec<Value> = stages
        .iter()
        .flat_map(|s| s.outputs())
        .map(|n| summary(n, artifacts.get(n).unwrap()))
        .collect();
    data.artifacts = artifacts;
    data.events = events;
    Ok(Json(json!({ "op": op, "artifacts": produced })))
}

#[derive(Deserialize)]
struct DownloadQuery {
    #[serde(default)]
    depth: Option<Depth>,
}

async fn download_artifact(
    State(state): State<Arc<AppState>>,
    UrlPath((id, name)): UrlPath<(String, String)>,
    Query(query): Query<DownloadQuery>,
) -> ApiResult<Response> {
    let session = state.session(&id).await?;
    let data = session.data.lock().await;
    let artifact = data
        .artifacts
        .get(&name)
        .ok_or_else(|| ApiError::not_found(format!("no artifact named {name:?}")))?;
    let bytes = artifact.encode(query.depth.unwrap_or_default())?;
    Ok(([(header::CONTENT_TYPE, artifact.media_type())], bytes).into_response())
}
