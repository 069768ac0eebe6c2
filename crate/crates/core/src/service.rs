//! HTTP front end over one knowledge base and one policy registry.
//!
//! Mutations go through a single lock and bump a revision counter. `/react`
//! copies the current state under the lock and reasons outside it, so a
//! reaction never sees a half-applied mutation and never blocks writers for
//! longer than an `Arc` clone.
//!
//! | method | path                       | body                               |
//! |--------|----------------------------|------------------------------------|
//! | GET    | `/health`                  |                                    |
//! | PUT    | `/model`                   | environment document               |
//! | POST   | `/goals`                   | `{user, zone, instance, value}`    |
//! | POST   | `/sensors/{id}`            | `{value}`                          |
//! | PUT    | `/policies/{kind}/{name}`  | policy source text                 |
//! | GET    | `/policies/{kind}/{name}`  |                                    |
//! | PUT    | `/bindings`                | `{defaultMediation, actuation, validation}` |
//! | POST   | `/react`                   |                                    |
//!
//! Errors are `{"code": ..., "message": ...}` with extra fields where useful.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::document::EnvironmentDocument;
use crate::dsl::{self, PolicyKind};
use crate::model::{set_goal, Goal, Snapshot};
use crate::pipeline::{react, ReactError};
use crate::registry::PolicyRegistry;
use crate::scenario::{PolicyBindings, Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Scenario whose model and policies are loaded at startup.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: default_bind(),
            port: default_port(),
            scenario: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid {var}: {reason}")]
    Env { var: &'static str, reason: String },
    #[error("invalid bind address `{0}`")]
    Address(String),
}

pub const ENV_BIND: &str = "GOALMED_BIND";
pub const ENV_PORT: &str = "GOALMED_PORT";

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` (or the defaults) and applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_owned(),
                    source,
                })?;
                let mut config = Self::from_toml(&text)?;
                if let (Some(s), Some(dir)) = (&config.scenario, p.parent()) {
                    config.scenario = Some(dir.join(s));
                }
                config
            }
            None => ServiceConfig::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.address()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(bind) = var(ENV_BIND) {
            self.bind = bind;
        }
        if let Some(port) = var(ENV_PORT) {
            self.port = port
                .parse()
                .map_err(|e: std::num::ParseIntError| ConfigError::Env {
                    var: ENV_PORT,
                    reason: e.to_string(),
                })?;
        }
        Ok(())
    }

    pub fn address(&self) -> Result<SocketAddr, ConfigError> {
        format!("{}:{}", self.bind, self.port)
            .parse()
            .map_err(|_| ConfigError::Address(self.bind.clone()))
    }
}

#[derive(Debug, Default)]
struct Shared {
    snapshot: Option<Arc<Snapshot>>,
    registry: Arc<PolicyRegistry>,
    revision: u64,
}

/// Service state; cheap to clone.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    inner: Arc<Mutex<Shared>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// State preloaded with a scenario's model, goals and policies at
    /// revision 1.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, ScenarioError> {
        let (snapshot, registry) = scenario.build()?;
        Ok(AppState {
            inner: Arc::new(Mutex::new(Shared {
                snapshot: Some(Arc::new(snapshot)),
                registry: Arc::new(registry),
                revision: 1,
            })),
        })
    }

    pub fn revision(&self) -> u64 {
        self.lock().revision
    }

    fn lock(&self) -> MutexGuard<'_, Shared> {
        // A panicking handler cannot leave `Shared` half-written: every
        // mutation builds its new value before assigning it.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        let mut body = Map::new();
        body.insert("code".into(), code.into());
        body.insert("message".into(), Value::String(message.into()));
        ApiError { status, body }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.body.insert(key.into(), value);
        self
    }

    fn no_model() -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "no-model",
            "no environment model has been uploaded",
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(Value::Object(self.body))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        match r {
            JsonRejection::MissingJsonContentType(_) => ApiError::new(
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                "unsupported-media-type",
                r.body_text(),
            ),
            JsonRejection::JsonSyntaxError(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "syntax-error", r.body_text())
            }
            _ => ApiError::new(StatusCode::BAD_REQUEST, "invalid-body", r.body_text()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T: serde::de::DeserializeOwned>(
    payload: Result<Json<Value>, JsonRejection>,
) -> ApiResult<T> {
    let Json(value) = payload?;
    serde_json::from_value(value)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid-body", e.to_string()))
}

fn revision(r: u64) -> Json<Value> {
    Json(json!({ "revision": r }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/model", put(put_model))
        .route("/goals", post(post_goal))
        .route("/sensors/{id}", post(post_sensor))
        .route("/policies/{kind}/{name}", put(put_policy).get(get_policy))
        .route("/bindings", put(put_bindings))
        .route("/react", post(post_react))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "status": "ok", "revision": state.revision() }))
}

async fn put_model(
    State(state): State<AppState>,
    payload: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let doc: EnvironmentDocument = body(payload)?;
    let snapshot = Snapshot::from_document(&doc)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string()))?;
    let mut shared = state.lock();
    shared.snapshot = Some(Arc::new(snapshot));
    shared.revision += 1;
    Ok(revision(shared.revision))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Reading {
    value: f64,
}

async fn post_goal(
    State(state): State<AppState>,
    payload: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let goal: Goal = body(payload)?;
    if !goal.value.is_finite() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "non-finite-value",
            "goal value must be finite",
        ));
    }
    let mut shared = state.lock();
    let snapshot = shared.snapshot.as_mut().ok_or_else(ApiError::no_model)?;
    set_goal(&mut Arc::make_mut(snapshot).goals, goal);
    shared.revision += 1;
    Ok(revision(shared.revision))
}

async fn post_sensor(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let reading: Reading = body(payload)?;
    let mut shared = state.lock();
    let snapshot = shared.snapshot.as_mut().ok_or_else(ApiError::no_model)?;
    if snapshot.model.sensor(&id).is_none() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown-sensor",
            format!("unknown sensor `{id}`"),
        ));
    }
    Arc::make_mut(snapshot)
        .model
        .update_sensor(&id, reading.value)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string()))?;
    shared.revision += 1;
    Ok(revision(shared.revision))
}

fn policy_kind(kind: &str) -> ApiResult<PolicyKind> {
    kind.parse()
        .map_err(|e: String| ApiError::new(StatusCode::NOT_FOUND, "unknown-policy-kind", e))
}

async fn put_policy(
    State(state): State<AppState>,
    UrlPath((kind, name)): UrlPath<(String, String)>,
    source: String,
) -> ApiResult<Json<Value>> {
    let kind = policy_kind(&kind)?;
    let program = dsl::parse_policy_as(&source, kind).map_err(|e| {
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string());
        if let Some(pos) = e.pos() {
            err = err
                .with("line", pos.line.into())
                .with("column", pos.column.into());
        }
        err
    })?;
    let mut shared = state.lock();
    let mut registry = (*shared.registry).clone();
    registry
        .register_program(program.with_name(name))
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid-policy", e.to_string()))?;
    shared.registry = Arc::new(registry);
    shared.revision += 1;
    Ok(revision(shared.revision))
}

async fn get_policy(
    State(state): State<AppState>,
    UrlPath((kind, name)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let kind = policy_kind(&kind)?;
    let registry = state.lock().registry.clone();
    match registry.program(kind, &name) {
        Some(p) => Ok((
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            dsl::print_policy(p),
        )
            .into_response()),
        None if registry.contains(kind, &name) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "native-policy",
            format!("{kind} policy `{name}` is built in and has no source"),
        )),
        None => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown-policy",
            format!("no {kind} policy named `{name}`"),
        )),
    }
}

async fn put_bindings(
    State(state): State<AppState>,
    payload: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let bindings: PolicyBindings = body(payload)?;
    let mut shared = state.lock();
    let mut registry = (*shared.registry).clone();
    bindings
        .apply(&mut registry)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "unknown-policy", e.to_string()))?;
    shared.registry = Arc::new(registry);
    shared.revision += 1;
    Ok(revision(shared.revision))
}

async fn post_react(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let (snapshot, registry, rev) = {
        let shared = state.lock();
        let snapshot = shared.snapshot.clone().ok_or_else(ApiError::no_model)?;
        (snapshot, shared.registry.clone(), shared.revision)
    };
    match react(&snapshot, &registry) {
        Ok(result) => Ok(Json(json!({
            "revision": rev,
            "requests": result.requests,
            "mediated": result.mediated,
            "actions": result.actions,
        }))),
        Err(e) => {
            let violations = match &e {
                ReactError::MediationInvalid(v) => serde_json::to_value(v).unwrap_or_default(),
                ReactError::ActionsInvalid(v) => serde_json::to_value(v).unwrap_or_default(),
                ReactError::Policy(_) => Value::Array(Vec::new()),
            };
            Err(
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
                    .with("violations", violations)
                    .with("revision", rev.into()),
            )
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let addr = config.address()?;
    let state = match &config.scenario {
        Some(path) => AppState::from_scenario(&Scenario::load(path)?)?,
        None => AppState::new(),
    };
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let c = ServiceConfig::from_toml("").unwrap();
        assert_eq!(c, ServiceConfig::default());
        let mut c = ServiceConfig::from_toml("bind = \"0.0.0.0\"\nport = 9000\n").unwrap();
        assert_eq!(c.address().unwrap().port(), 9000);
        c.apply_env(|k| (k == ENV_PORT).then(|| "9100".to_owned()))
            .unwrap();
        assert_eq!(c.port, 9100);
        assert_eq!(c.bind, "0.0.0.0");
    }

    #[test]
    fn invalid_configs() {
        assert!(ServiceConfig::from_toml("port = \"x\"").is_err());
        assert!(ServiceConfig::from_toml("colour = 1").is_err());
        let mut c = ServiceConfig::default();
        assert!(c.apply_env(|_| Some("notaport".into())).is_err());
        c.bind = "not an address".into();
        assert!(matches!(c.address(), Err(ConfigError::Address(_))));
    }
}
