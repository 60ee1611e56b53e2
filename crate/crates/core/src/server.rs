//! HTTP+JSON front for debugging sessions.
//!
//! Every state change goes through [`Session::answer`]. With a data
//! directory, each session's creation request and answer log are written
//! to disk and replayed on startup.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as J};
use tower_http::cors::CorsLayer;

use crate::evaluator::{evaluate, AttributedTree, EvalStatus};
use crate::gad::{Answer, GadConfig, Strategy};
use crate::grammar::{validate_against, ShapeCheck};
use crate::parse_grammar;
use crate::sentence::parse_input;
use crate::session::{reference_judge, transcript, Phase, Record, Session, SessionError, Verdict};
use crate::value::diff_values;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreateRequest {
    pub grammar: String,
    pub input: String,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Intended grammar; when given, the server judges the symptom itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

fn default_strategy() -> String {
    "gad".into()
}

fn default_epsilon() -> usize {
    1
}

#[derive(Debug, Deserialize)]
pub struct AnswerRequest {
    pub answer: String,
    /// When given, must match the pending query.
    #[serde(default)]
    pub fingerprint: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct VolunteerRequest {
    pub instance: String,
}

#[derive(Debug, Deserialize)]
pub struct DiffParams {
    pub a: String,
    pub b: String,
}

/// JSON problem response.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub span: Option<J>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, kind, message: message.into(), span: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"status": self.status.as_u16(), "kind": self.kind, "message": self.message, "span": self.span}});
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        let status = match &e {
            SessionError::Sentence(_) | SessionError::Circularity(_) => StatusCode::BAD_REQUEST,
            SessionError::NoPendingQuery => StatusCode::CONFLICT,
            SessionError::Gad(crate::gad::GadError::Stale) => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let kind = match &e {
            SessionError::Sentence(_) => "input",
            SessionError::Circularity(_) => "circularity",
            SessionError::NoPendingQuery => "no_pending_query",
            SessionError::UnknownInstance(_) => "unknown_instance",
            SessionError::NothingToDebug => "no_symptom",
            SessionError::Gad(_) => "engine",
        };
        ApiError::new(status, kind, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Entry {
    request: CreateRequest,
    session: Session,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Mutex<Entry>>>>>,
    data_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new() -> AppState {
        AppState::default()
    }

    /// Persists to `dir` and restores every session found there.
    pub fn with_data_dir(dir: PathBuf) -> std::io::Result<AppState> {
        fs::create_dir_all(&dir)?;
        let state = AppState { sessions: Arc::default(), data_dir: Some(dir.clone()) };
        for e in fs::read_dir(&dir)? {
            let path = e?.path();
            if path.extension().and_then(|x| x.to_str()) != Some("json") {
                continue;
            }
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let Ok(req) = serde_json::from_str::<CreateRequest>(&fs::read_to_string(&path)?) else { continue };
            let log = fs::read_to_string(path.with_extension("jsonl")).unwrap_or_default();
            let Ok(records) = transcript::from_jsonl(&log) else { continue };
            if let Ok(session) = restore(&req, &records) {
                state.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(Entry { request: req, session })));
            }
        }
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}")))
    }

    fn persist_request(&self, id: &str, req: &CreateRequest) {
        if let Some(dir) = &self.data_dir {
            let _ = fs::write(dir.join(format!("{id}.json")), serde_json::to_string_pretty(req).unwrap());
            let _ = fs::write(dir.join(format!("{id}.jsonl")), "");
        }
    }

    fn persist_records(&self, id: &str, records: &[Record]) {
        if let (Some(dir), false) = (&self.data_dir, records.is_empty()) {
            if let Ok(mut f) = fs::OpenOptions::new().append(true).create(true).open(dir.join(format!("{id}.jsonl"))) {
                let _ = f.write_all(transcript::to_jsonl(records).as_bytes());
            }
        }
    }
}

fn answer_from_record(at: &AttributedTree, r: &Record) -> Option<Answer> {
    Some(match r.answer.as_str() {
        "correct" => Answer::Correct,
        "wrong" => Answer::Wrong,
        "skip" => Answer::Skip,
        "abort" => Answer::Abort,
        "wrong_value" => Answer::WrongValue(at.parse_instance(r.instance.as_deref()?)?),
        _ => return None,
    })
}

fn start(req: &CreateRequest) -> ApiResult<Session> {
    let g = parse_grammar(&req.grammar).map_err(|e| ApiError {
        span: serde_json::to_value(e.span).ok(),
        ..ApiError::new(StatusCode::BAD_REQUEST, "grammar", e.to_string())
    })?;
    let strategy: Strategy = req.strategy.parse().map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "request", e))?;
    let g = Arc::new(g);
    let tree = parse_input(&g, &req.input).map_err(SessionError::from)?;
    let at = Arc::new(evaluate(g.clone(), tree).map_err(SessionError::from)?);
    let mut config = GadConfig::new(strategy, req.epsilon);
    if let Some(l) = req.lambda {
        config.lambda = l;
    }
    Ok(Session::start(at, config)?)
}

/// Rebuilds a session by replaying its log in order.
fn restore(req: &CreateRequest, records: &[Record]) -> ApiResult<Session> {
    let mut s = start(req)?;
    for r in records {
        let pending = s.pending().ok_or(SessionError::NoPendingQuery)?;
        if pending.fingerprint != r.fingerprint {
            return Err(ApiError::new(StatusCode::CONFLICT, "replay", "log does not match the session"));
        }
        let a = answer_from_record(&s.trace, r)
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "replay", format!("bad answer {:?}", r.answer)))?;
        s.answer(a)?;
    }
    Ok(s)
}

fn snapshot(id: &str, e: &Entry) -> J {
    let s = &e.session;
    let at = &*s.trace;
    let g = &at.grammar;
    let rules: Vec<J> = g
        .rules()
        .map(|(p, r)| json!({"id": r.id.to_string(), "text": p.rule_text(r), "production": p.display_header(), "span": r.span}))
        .collect();
    let nodes: Vec<J> = at
        .tree
        .nodes
        .iter()
        .map(|n| {
            let attrs: Vec<J> = if n.symbol.is_terminal() {
                vec![]
            } else {
                at.inherited_of(n.id)
                    .into_iter()
                    .chain(at.synthesized_of(n.id))
                    .map(|i| {
                        json!({
                            "instance": at.label(i),
                            "name": at.attr_name(i),
                            "kind": at.attr_kind(i),
                            "sort": at.attr_sort(i).name(),
                            "value": at.value(i).map(|v| v.to_json()),
                        })
                    })
                    .collect()
            };
            json!({
                "id": n.id,
                "symbol": n.symbol.name(),
                "terminal": n.symbol.is_terminal(),
                "production": n.production.as_ref().map(|p| p.0.clone()),
                "children": n.children,
                "text": at.tree.text(n.id),
                "attrs": attrs,
            })
        })
        .collect();
    let status = match &at.status {
        EvalStatus::Completed => json!({"state": "completed"}),
        EvalStatus::Failed(f) => json!({
            "state": "failed",
            "instance": at.label(f.comp),
            "kind": format!("{:?}", f.kind),
            "message": f.message,
        }),
    };
    let report = s.report().map(|r| {
        let mut v = serde_json::to_value(r).unwrap();
        v["candidate_comps"] = json!(r.candidate_comps.iter().map(|&c| at.label(c)).collect::<Vec<_>>());
        v["text"] = json!(r.render(at));
        v
    });
    let state = s.state().map(|st| {
        json!({"suspect": st.suspect.len(), "bug": st.bug_acs().len(), "correct": st.correct.len(), "version": st.version()})
    });
    json!({
        "schema": SCHEMA_VERSION,
        "id": id,
        "phase": s.phase(),
        "strategy": s.config.strategy,
        "epsilon": s.config.epsilon,
        "input": e.request.input,
        "grammar": {"name": g.name, "source": e.request.grammar, "rules": rules},
        "tree": {"root": at.root(), "nodes": nodes},
        "status": status,
        "pending": s.pending().map(|q| q.to_json(at)),
        "report": report,
        "state": state,
        "queries_asked": s.queries_asked(),
        "transcript": s.transcript,
    })
}

async fn create(State(app): State<AppState>, Json(req): Json<CreateRequest>) -> ApiResult<(StatusCode, Json<J>)> {
    let mut session = start(&req)?;
    if let Some(src) = &req.reference {
        let intended = parse_grammar(src).map_err(|e| ApiError {
            span: serde_json::to_value(e.span).ok(),
            ..ApiError::new(StatusCode::BAD_REQUEST, "reference_grammar", e.to_string())
        })?;
        if let ShapeCheck::ShapeMismatch(d) = validate_against(&session.trace.grammar, &intended) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "reference_grammar", d.join("; ")));
        }
        if session.phase() == Phase::Symptom {
            let q = session.pending().expect("symptom query");
            match reference_judge(&intended, &session.trace, &q.acc) {
                Verdict::Correct => return Err(SessionError::NothingToDebug.into()),
                Verdict::Wrong(_) => session.answer(Answer::Wrong)?,
            }
        }
    }
    let id = format!("{:016x}", rand::random::<u64>());
    let entry = Entry { request: req, session };
    app.persist_request(&id, &entry.request);
    app.persist_records(&id, &entry.session.transcript);
    let body = snapshot(&id, &entry);
    app.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn show(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<J>> {
    let e = app.get(&id)?;
    let e = e.lock().unwrap();
    Ok(Json(snapshot(&id, &e)))
}

fn advance(app: &AppState, id: &str, e: &mut Entry, a: Answer) -> ApiResult<Json<J>> {
    let before = e.session.transcript.len();
    e.session.answer(a)?;
    app.persist_records(id, &e.session.transcript[before..]);
    Ok(Json(snapshot(id, e)))
}

async fn answer(State(app): State<AppState>, Path(id): Path<String>, Json(req): Json<AnswerRequest>) -> ApiResult<Json<J>> {
    let a = match req.answer.as_str() {
        "correct" => Answer::Correct,
        "wrong" => Answer::Wrong,
        "skip" => Answer::Skip,
        "abort" => Answer::Abort,
        other => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "request", format!("unknown answer {other:?}")));
        }
    };
    let e = app.get(&id)?;
    let mut e = e.lock().unwrap();
    let pending = e.session.pending().ok_or(SessionError::NoPendingQuery)?;
    if req.fingerprint.as_ref().is_some_and(|f| *f != pending.fingerprint) {
        return Err(SessionError::Gad(crate::gad::GadError::Stale).into());
    }
    advance(&app, &id, &mut e, a)
}

async fn volunteer(State(app): State<AppState>, Path(id): Path<String>, Json(req): Json<VolunteerRequest>) -> ApiResult<Json<J>> {
    let e = app.get(&id)?;
    let mut e = e.lock().unwrap();
    if e.session.pending().is_none() {
        return Err(SessionError::NoPendingQuery.into());
    }
    let t = crate::session::instance(&e.session.trace, &req.instance)?;
    advance(&app, &id, &mut e, Answer::WrongValue(t))
}

async fn diff(State(app): State<AppState>, Path(id): Path<String>, UrlQuery(p): UrlQuery<DiffParams>) -> ApiResult<Json<J>> {
    let e = app.get(&id)?;
    let e = e.lock().unwrap();
    let at = &e.session.trace;
    let value = |label: &str| {
        at.parse_instance(label)
            .and_then(|i| at.value(i))
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_instance", format!("no evaluated instance {label:?}")))
    };
    let report = diff_values(value(&p.a)?, value(&p.b)?);
    Ok(Json(json!({"a": p.a, "b": p.b, "changes": report.changes, "text": report.to_string()})))
}

async fn transcript_of(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<String> {
    let e = app.get(&id)?;
    let e = e.lock().unwrap();
    Ok(transcript::to_jsonl(&e.session.transcript))
}

async fn schemas() -> Json<J> {
    Json(json!({"version": SCHEMA_VERSION, "schemas": SCHEMAS.iter().map(|(n, _)| *n).collect::<Vec<_>>()}))
}

async fn schema(Path(name): Path<String>) -> ApiResult<Json<J>> {
    let name = name.trim_end_matches(".json");
    SCHEMAS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| Json(serde_json::from_str(s).expect("bundled schema")))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no schema {name}")))
}

pub const SCHEMAS: [(&str, &str); 5] = [
    ("session", include_str!("../../../docs/schemas/session.json")),
    ("query", include_str!("../../../docs/schemas/query.json")),
    ("record", include_str!("../../../docs/schemas/record.json")),
    ("diff", include_str!("../../../docs/schemas/diff.json")),
    ("error", include_str!("../../../docs/schemas/error.json")),
];

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/schema", get(schemas))
        .route("/schema/{name}", get(schema))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/volunteer", post(volunteer))
        .route("/sessions/{id}/diff", get(diff))
        .route("/sessions/{id}/transcript", get(transcript_of))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `addr`, reports the bound address through `on_bound`, and serves
/// until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
