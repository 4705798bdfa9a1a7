//! HTTP session service: a human plays one agent of a scenario against
//! engine agents.
//!
//! | method | path | |
//! |---|---|---|
//! | `GET` | `/scenarios` | built-in scenario names |
//! | `POST` | `/sessions` | create a session |
//! | `GET` | `/sessions/{id}/view` | the human's view |
//! | `POST` | `/sessions/{id}/actions` | submit a human action |
//! | `GET` | `/sessions/{id}/events?since=N` | trace records from `N` on |
//! | `DELETE` | `/sessions/{id}` | close a session |
//!
//! The view only holds what the human's own belief state supports: feasible
//! subplans of its designated worlds and the candidate actions it allows.
//! Engine agents move right after each accepted human action, so their
//! replies are part of the submit response.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use epike_core::actions::{mk_answer, product_update, ActionKind, Answer, PointedAction, WireAction};
use epike_core::doxastic::{AgentId, DoxFormula, FormulaContext};
use epike_core::executor::candidate_actions;
use epike_core::kb::CachedSolver;
use epike_core::mcts::KindSet;
use serde::{Deserialize, Serialize};

use crate::scenario::{Scenario, ScenarioFile};
use crate::sim::{make_agent, AgentKind, RunConfig, SimError, Simulation, TraceRecord};

/// Engine moves allowed between two human actions.
const MAX_ENGINE_ACTIONS: usize = 32;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Builtin(String),
    Inline(Box<ScenarioFile>),
}

#[derive(Clone, Debug, Deserialize)]
pub struct CreateRequest {
    pub scenario: ScenarioRef,
    /// Name of the human-controlled agent.
    pub human: String,
    /// Kind of every other agent.
    #[serde(default = "default_engine")]
    pub engine: AgentKind,
    #[serde(default)]
    pub seed: u64,
    pub iterations: Option<u32>,
    pub timeout_ms: Option<u64>,
}

fn default_engine() -> AgentKind {
    AgentKind::Epike
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Success,
    Failure,
    /// An agent could not make sense of an observation.
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub seq: u64,
    pub asker: String,
    pub formula: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanView {
    pub session: u64,
    pub human: String,
    pub status: Status,
    /// Sequence number the next action will get.
    pub next_seq: u64,
    /// Subplans feasible in some world the human holds possible, as
    /// `variable=value` assignments.
    pub subplans: Vec<Vec<String>>,
    pub candidates: Vec<WireAction>,
    pub pending_question: Option<Question>,
    pub last_engine_action: Option<TraceRecord>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Events {
    pub status: Status,
    pub events: Vec<TraceRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Created {
    pub session: u64,
    pub human: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Since {
    #[serde(default)]
    pub since: u64,
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn not_found(id: u64) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no session {id}"))
}

struct Live {
    id: u64,
    scenario: Scenario,
    sim: Simulation,
    human: AgentId,
    solver: CachedSolver,
    note: Option<String>,
    broken: bool,
}

impl Live {
    fn create(id: u64, req: CreateRequest) -> Result<Live, ApiError> {
        let scenario = match req.scenario {
            ScenarioRef::Builtin(name) => Scenario::builtin(&name),
            ScenarioRef::Inline(file) => Scenario::from_file(*file),
        }
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
        let human = scenario
            .agent(&req.human)
            .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
        let mut cfg = RunConfig {
            seed: req.seed,
            ..RunConfig::default()
        };
        if let Some(k) = req.iterations {
            cfg.session.iteration_cap = k;
        }
        cfg.session.time_budget = req.timeout_ms.map(Duration::from_millis);
        let n = scenario.lib.agents().len();
        let agents = (0..n)
            .map(|i| {
                let a = AgentId(i as u16);
                // The human's slot tracks its beliefs but never moves by itself.
                let kind = if a == human { AgentKind::Epike } else { req.engine.clone() };
                make_agent(&scenario, a, &kind, &cfg)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
        let ego = if human.index() == 0 { 1.min(n - 1) } else { 0 };
        let mut sim = Simulation::new(&scenario, agents, ego, true);
        sim.set_external(human);
        let mut live = Live {
            id,
            scenario,
            sim,
            human,
            solver: CachedSolver::new(),
            note: None,
            broken: false,
        };
        for a in live.scenario.prefix.clone() {
            live.guard(|sim| sim.apply(&a, Duration::ZERO));
        }
        live.settle();
        Ok(live)
    }

    fn guard(&mut self, f: impl FnOnce(&mut Simulation) -> Result<(), SimError>) {
        if self.broken {
            return;
        }
        if let Err(e) = f(&mut self.sim) {
            self.note = Some(e.to_string());
            self.broken = true;
        }
    }

    /// Lets engine agents move until they all wait.
    fn settle(&mut self) {
        for _ in 0..MAX_ENGINE_ACTIONS {
            if self.broken {
                return;
            }
            let mut moved = false;
            self.guard(|sim| {
                moved = sim.step()?;
                Ok(())
            });
            if !moved {
                return;
            }
        }
        self.note = Some(format!("engine stopped after {MAX_ENGINE_ACTIONS} actions in a row"));
    }

    fn status(&self) -> Status {
        if self.sim.failed() {
            Status::Failure
        } else if self.broken {
            Status::Error
        } else if self.sim.succeeded().unwrap_or(false) {
            Status::Success
        } else {
            Status::Running
        }
    }

    fn human_name(&self) -> String {
        self.scenario.lib.agents()[self.human.index()].clone()
    }

    /// The latest question to the human not yet answered by it.
    fn pending(&self) -> Option<&TraceRecord> {
        let name = self.human_name();
        let last = self.sim.trace.iter().rev().find(|r| {
            (r.kind == ActionKind::Ask && r.askee.as_deref() == Some(name.as_str()))
                || (r.kind == ActionKind::Answer && r.actor == name)
        })?;
        (last.kind == ActionKind::Ask).then_some(last)
    }

    fn candidates(&self) -> Result<Vec<PointedAction>, ApiError> {
        if self.status() != Status::Running {
            return Ok(Vec::new());
        }
        let lib = &self.scenario.lib;
        let view = self.sim.agent(self.human).state();
        let kinds = KindSet::of(&[
            ActionKind::Execute,
            ActionKind::Noop,
            ActionKind::Intent,
            ActionKind::Explain,
            ActionKind::Ask,
        ]);
        let internal = |e: epike_core::doxastic::DoxError| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
        let mut out = candidate_actions(view, self.human, kinds, lib, &self.solver, 1).map_err(internal)?;
        if let Some(q) = self.pending() {
            let ctx = FormulaContext::new(lib.schema(), lib.agents()).with_success(lib.success_condition());
            let text = q.payload.as_deref().unwrap_or_default();
            let f: DoxFormula = ctx
                .parse(text)
                .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            for answer in [Answer::Yes, Answer::No, Answer::Unknown] {
                let act = mk_answer(self.human, f.clone(), answer)
                    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
                if product_update(view, &act, &self.solver).is_ok() {
                    out.push(act);
                }
            }
        }
        Ok(out)
    }

    fn view(&self) -> Result<HumanView, ApiError> {
        let lib = &self.scenario.lib;
        let state = self.sim.agent(self.human).state();
        let mut subplans = BTreeSet::new();
        for &w in state.designated() {
            for g in lib.feasible_subplans(&state.model.world(w).kb) {
                subplans.insert(lib.render_subplan(&g));
            }
        }
        let name = self.human_name();
        Ok(HumanView {
            session: self.id,
            human: name.clone(),
            status: self.status(),
            next_seq: self.sim.next_seq(),
            subplans: subplans.into_iter().collect(),
            candidates: self.candidates()?.iter().map(|a| a.encode(lib)).collect(),
            pending_question: self.pending().map(|r| Question {
                seq: r.seq,
                asker: r.actor.clone(),
                formula: r.payload.clone().unwrap_or_default(),
            }),
            last_engine_action: self.sim.trace.iter().rev().find(|r| r.actor != name).cloned(),
            note: self.note.clone(),
        })
    }

    /// Applies a human action if it is one of the current candidates, then
    /// lets the engine respond. Returns the new trace records.
    fn submit(&mut self, wire: WireAction) -> Result<Vec<TraceRecord>, ApiError> {
        let name = self.human_name();
        if wire.actor != name {
            return Err(ApiError(StatusCode::CONFLICT, format!("actions must come from `{name}`")));
        }
        let lib = self.scenario.lib.clone();
        let action =
            PointedAction::decode(&wire, &lib).map_err(|e| ApiError(StatusCode::CONFLICT, e.to_string()))?;
        let canonical = action.encode(&lib);
        if !self.candidates()?.iter().any(|c| c.encode(&lib) == canonical) {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!("`{}` is not available now", action.describe(&lib)),
            ));
        }
        let from = self.sim.trace.len();
        self.guard(|sim| sim.apply(&action, Duration::ZERO));
        self.settle();
        Ok(self.sim.trace[from..].to_vec())
    }
}

/// Open sessions, shared by all handlers.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<u64, Arc<Mutex<Live>>>>>,
    next: Arc<AtomicU64>,
}

impl AppState {
    fn get(&self, id: u64) -> Result<Arc<Mutex<Live>>, ApiError> {
        self.sessions.lock().unwrap().get(&id).cloned().ok_or_else(|| not_found(id))
    }
}

/// Engine work runs off the async threads.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn list_scenarios() -> Json<Vec<&'static str>> {
    Json(Scenario::builtin_names().collect())
}

async fn create(State(app): State<AppState>, Json(req): Json<CreateRequest>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let id = app.next.fetch_add(1, Ordering::Relaxed) + 1;
    let live = blocking(move || Live::create(id, req)).await?;
    let created = Created {
        session: id,
        human: live.human_name(),
    };
    app.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(created)))
}

async fn view(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Json<HumanView>, ApiError> {
    let live = app.get(id)?;
    blocking(move || live.lock().unwrap().view()).await.map(Json)
}

async fn submit(
    State(app): State<AppState>,
    Path(id): Path<u64>,
    Json(wire): Json<WireAction>,
) -> Result<Json<Events>, ApiError> {
    let live = app.get(id)?;
    blocking(move || {
        let mut live = live.lock().unwrap();
        let events = live.submit(wire)?;
        Ok(Events {
            status: live.status(),
            events,
        })
    })
    .await
    .map(Json)
}

async fn events(State(app): State<AppState>, Path(id): Path<u64>, Query(q): Query<Since>) -> Result<Json<Events>, ApiError> {
    let live = app.get(id)?;
    let live = live.lock().unwrap();
    Ok(Json(Events {
        status: live.status(),
        events: live.sim.trace.iter().filter(|r| r.seq >= q.since).cloned().collect(),
    }))
}

async fn close(State(app): State<AppState>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    app.sessions.lock().unwrap().remove(&id).ok_or_else(|| not_found(id))?;
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", post(create))
        .route("/sessions/{id}", axum::routing::delete(close))
        .route("/sessions/{id}/view", get(view))
        .route("/sessions/{id}/actions", post(submit))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

pub async fn serve(port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    axum::serve(listener, router(AppState::default())).await
}
