//! HTTP service for interactive editing sessions.
//!
//! | method | path                         | body / query        | response |
//! |--------|------------------------------|---------------------|----------|
//! | POST   | `/sessions`                  | `{"checkpoint": name}` or `{"model": <checkpoint>}` | `{"id", ...}` |
//! | GET    | `/sessions/{id}`             |                     | session info |
//! | DELETE | `/sessions/{id}`             |                     | 204 |
//! | GET    | `/sessions/{id}/mesh`        | `?res=R`            | binary mesh |
//! | GET    | `/sessions/{id}/basis/{p}`   | `?res=R`            | binary mesh with `basis_p` channel |
//! | GET    | `/sessions/{id}/volume`      | `?res=R`            | `{"volume"}` |
//! | POST   | `/sessions/{id}/edit`        | edit spec           | NDJSON event stream |
//! | POST   | `/sessions/{id}/semantic-edit` | edit spec, optional `?member=k` | NDJSON event stream |
//! | POST   | `/sessions/{id}/smooth`      | smoothing config    | NDJSON event stream |
//! | POST   | `/sessions/{id}/rigid-edit`  | rigid config        | NDJSON event stream |
//! | POST   | `/sessions/{id}/undo`        |                     | session info |
//!
//! Streams carry one JSON object per line with an `event` of `started`,
//! `iteration` (or `step`), `mesh_refresh`, `done` or `error`. A
//! `mesh_refresh` means `GET .../mesh` now returns the updated surface.
//! Errors: 404 unknown session, 409 operation in progress or nothing to
//! undo, 422 invalid spec.

use std::convert::Infallible;
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use isoedit_core::field::{FieldModel, ImplicitField};
use isoedit_core::geometry::estimate_volume;
use isoedit_core::{editing, flows, rigid, training};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tokio_stream::wrappers::ReceiverStream;
use tokio_stream::StreamExt;

use crate::checkpoint::Checkpoint;
use crate::config::Defaults;
use crate::error::{parse_json, AppError};
use crate::mesh_io;
use crate::ops::{basis_mesh, extract_mesh};
use crate::session::{Session, SessionStore, WriteGuard};

/// Environment variable holding the bind address.
pub const ADDR_VAR: &str = "ISOEDIT_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub model_dir: Option<PathBuf>,
    pub defaults: Arc<Defaults>,
}

impl AppState {
    pub fn new(model_dir: Option<PathBuf>, defaults: Defaults) -> Self {
        AppState { store: Arc::default(), model_dir, defaults: Arc::new(defaults) }
    }
}

impl AppError {
    pub fn status(&self) -> StatusCode {
        match self {
            AppError::UnknownSession(_) => StatusCode::NOT_FOUND,
            AppError::Busy(_) | AppError::Conflict(_) => StatusCode::CONFLICT,
            e if e.is_invalid_input() => StatusCode::UNPROCESSABLE_ENTITY,
            AppError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.to_json())).into_response()
    }
}

type ApiResult<T> = Result<T, AppError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(delete_session))
        .route("/sessions/{id}/mesh", get(mesh))
        .route("/sessions/{id}/basis/{p}", get(basis))
        .route("/sessions/{id}/volume", get(volume))
        .route("/sessions/{id}/edit", post(edit))
        .route("/sessions/{id}/semantic-edit", post(semantic_edit))
        .route("/sessions/{id}/smooth", post(smooth))
        .route("/sessions/{id}/rigid-edit", post(rigid_edit))
        .route("/sessions/{id}/undo", post(undo))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    checkpoint: Option<String>,
    #[serde(default)]
    model: Option<Value>,
}

fn info(s: &Session) -> Value {
    let f = s.view();
    json!({
        "id": s.id,
        "param_count": f.param_count(),
        "latent_dim": f.latent_range().map(|r| r.len()),
        "members": s.latents.as_ref().map(|l| l.len()),
        "history": s.history_len(),
        "busy": s.is_busy(),
        "snapshot": f.params().fingerprint(),
    })
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateSession = parse_json("session request", body_text(&body)?)?;
    let ckpt = match (req.checkpoint, req.model) {
        (Some(name), None) => {
            let dir = st.model_dir.as_ref().ok_or_else(|| AppError::Parse {
                document: "session request",
                field: "checkpoint".into(),
                message: "service has no model directory".into(),
            })?;
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(AppError::Parse {
                    document: "session request",
                    field: "checkpoint".into(),
                    message: "must be a plain file name".into(),
                });
            }
            let file = if name.ends_with(".json") { name } else { format!("{name}.json") };
            Checkpoint::load(&dir.join(file))?
        }
        (None, Some(doc)) => Checkpoint::from_json(&doc.to_string())?,
        _ => {
            return Err(AppError::Parse {
                document: "session request",
                field: "checkpoint".into(),
                message: "give exactly one of `checkpoint` or `model`".into(),
            })
        }
    };
    let latents = ckpt.latents.clone();
    let field = ckpt.into_field()?;
    let s = st.store.create(field, latents, st.defaults.undo_depth);
    Ok((StatusCode::CREATED, Json(info(&s))))
}

async fn session_info(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = st.store.get(&id)?;
    Ok(Json(info(&s)))
}

async fn delete_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let s = st.store.get(&id)?;
    let _guard = s.begin()?;
    st.store.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
struct ResQuery {
    res: Option<usize>,
}

fn resolution(q: &ResQuery, default: usize) -> ApiResult<usize> {
    let r = q.res.unwrap_or(default);
    if !(8..=512).contains(&r) {
        return Err(isoedit_core::Error::invalid("res", "must lie in 8..=512").into());
    }
    Ok(r)
}

fn binary(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| AppError::format(format!("worker failed: {e}")))?
}

async fn mesh(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<ResQuery>) -> ApiResult<Response> {
    let field = st.store.get(&id)?.view();
    let res = resolution(&q, st.defaults.mesh_resolution)?;
    let m = blocking(move || extract_mesh(&*field, res)).await?;
    Ok(binary(mesh_io::to_binary(&m)))
}

async fn basis(
    State(st): State<AppState>,
    Path((id, p)): Path<(String, usize)>,
    Query(q): Query<ResQuery>,
) -> ApiResult<Response> {
    let field = st.store.get(&id)?.view();
    let res = resolution(&q, st.defaults.mesh_resolution)?;
    let m = blocking(move || basis_mesh(&*field, p, res)).await?;
    Ok(binary(mesh_io::to_binary(&m)))
}

async fn volume(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<ResQuery>) -> ApiResult<Json<Value>> {
    let field = st.store.get(&id)?.view();
    let res = q.res.unwrap_or(st.defaults.volume_resolution);
    let v = blocking(move || Ok(estimate_volume(&*field, res)?)).await?;
    Ok(Json(json!({ "volume": v, "res": res })))
}

async fn undo(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = st.store.get(&id)?;
    s.undo()?;
    Ok(Json(info(&s)))
}

fn body_text(body: &Bytes) -> ApiResult<&str> {
    std::str::from_utf8(body).map_err(|_| AppError::Parse {
        document: "request",
        field: String::new(),
        message: "body is not UTF-8".into(),
    })
}

/// Emits NDJSON events from a worker thread.
struct Emitter(mpsc::Sender<Bytes>);

impl Emitter {
    /// False once the client has gone away.
    fn send(&self, v: Value) -> bool {
        let mut line = v.to_string();
        line.push('\n');
        self.0.blocking_send(Bytes::from(line)).is_ok()
    }

    fn flow(&self, v: Value) -> ControlFlow<()> {
        if self.send(v) {
            ControlFlow::Continue(())
        } else {
            ControlFlow::Break(())
        }
    }
}

/// Run `work` on a blocking thread with the session claimed, streaming its
/// events. The result is committed only if the client stayed connected.
fn stream(
    guard: WriteGuard,
    operation: &'static str,
    work: impl FnOnce(&WriteGuard, &Emitter) -> Result<(FieldModel, Value), AppError> + Send + 'static,
) -> Response {
    let (tx, rx) = mpsc::channel::<Bytes>(64);
    tokio::task::spawn_blocking(move || {
        let em = Emitter(tx);
        if !em.send(json!({ "event": "started", "operation": operation })) {
            return;
        }
        match work(&guard, &em) {
            Ok((field, summary)) => {
                if em.0.is_closed() {
                    return;
                }
                let snapshot = field.params().fingerprint();
                let session = guard.session().clone();
                guard.commit(field);
                em.send(json!({ "event": "mesh_refresh", "snapshot": snapshot }));
                em.send(json!({
                    "event": "done",
                    "operation": operation,
                    "snapshot": snapshot,
                    "history": session.history_len(),
                    "result": summary,
                }));
            }
            Err(e) => {
                em.send(json!({ "event": "error", "status": e.status().as_u16(), "error": e.to_json()["error"] }));
            }
        }
    });
    let body = Body::from_stream(ReceiverStream::new(rx).map(Ok::<_, Infallible>));
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

fn iteration_observer<'a, F: Into<FieldModel> + Clone>(
    guard: &'a WriteGuard,
    em: &'a Emitter,
) -> impl FnMut(&editing::IterationRecord, &F) -> ControlFlow<()> + 'a {
    move |rec, field| {
        guard.preview(field.clone().into());
        if em.flow(json!({ "event": "iteration", "record": rec })).is_break() {
            return ControlFlow::Break(());
        }
        em.flow(json!({ "event": "mesh_refresh", "iteration": rec.iteration }))
    }
}

async fn edit(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let s = st.store.get(&id)?;
    let spec = st.defaults.edit_spec(body_text(&body)?)?;
    let guard = s.begin()?;
    let field = s.committed();
    Ok(stream(guard, "edit", move |g, em| {
        let mut obs = iteration_observer::<FieldModel>(g, em);
        let (out, report) = editing::edit_with(&*field, &spec, &mut obs)?;
        Ok((out, serde_json::to_value(&report).expect("report serializes")))
    }))
}

#[derive(Debug, Deserialize)]
struct MemberQuery {
    member: Option<usize>,
}

async fn semantic_edit(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<MemberQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let s = st.store.get(&id)?;
    let spec = st.defaults.edit_spec(body_text(&body)?)?;
    if spec.fixed.is_some() {
        return Err(isoedit_core::Error::invalid("fixed", "semantic edits leave the rest of the boundary free").into());
    }
    let FieldModel::Latent(decoder) = &*s.committed() else {
        return Err(isoedit_core::Error::invalid("model", "semantic edits need a latent decoder").into());
    };
    let start = match q.member {
        Some(k) => {
            let codes = s.latents.as_ref().and_then(|l| l.get(k));
            let code = codes.ok_or_else(|| isoedit_core::Error::invalid("member", "no such family member"))?;
            decoder.with_latent(code)?
        }
        None => decoder.clone(),
    };
    let guard = s.begin()?;
    Ok(stream(guard, "semantic_edit", move |g, em| {
        let mut obs = iteration_observer::<isoedit_core::LatentField>(g, em);
        let (out, report) = training::semantic_edit_with(&start, &spec, &mut obs)?;
        let summary = json!({ "report": report, "latent": out.latent() });
        Ok((out.into(), summary))
    }))
}

async fn smooth(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let s = st.store.get(&id)?;
    let config = st.defaults.flow_config(body_text(&body)?)?;
    let guard = s.begin()?;
    let field = s.committed();
    Ok(stream(guard, "smooth", move |g, em| {
        let mut open = true;
        let (out, trace) = flows::run_smoothing_with(&*field, &config, &mut |step, f| {
            g.preview(f.clone());
            open = open
                && em.send(json!({ "event": "step", "record": step }))
                && em.send(json!({ "event": "mesh_refresh", "iteration": step.iteration }));
        })?;
        if !open {
            return Err(AppError::Conflict("client disconnected".into()));
        }
        Ok((out, serde_json::to_value(&trace).expect("trace serializes")))
    }))
}

async fn rigid_edit(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let s = st.store.get(&id)?;
    let config = st.defaults.rigid_config(body_text(&body)?)?;
    let guard = s.begin()?;
    let field = s.committed();
    let every = (config.iterations / 100).max(1);
    Ok(stream(guard, "rigid_edit", move |_, em| {
        let out = rigid::rigid_edit_with(&*field, &config, &mut |rec| {
            if rec.step % every == 0 {
                em.send(json!({ "event": "step", "record": rec }));
            }
        })?;
        let last = out.trace.last().copied();
        Ok((out.field, json!({ "final": last, "steps": out.trace.len() })))
    }))
}
