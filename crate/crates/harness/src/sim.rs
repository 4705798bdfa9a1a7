//! Joint execution against the ground truth.
//!
//! Every action is broadcast to all agents, the ground-truth knowledge base
//! is updated alongside, and agents are polled for their next move in a
//! fixed order with the ego agent first. Replies to questions go out before
//! anyone else is polled.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use epike_core::actions::{ActionKind, Answer, Payload, PointedAction, WireAction};
use epike_core::baseline::PikeSession;
use epike_core::doxastic::{AgentId, PointedState};
use epike_core::executor::{Agent, AgentSession, DecisionReport, SessionConfig, SessionError};
use epike_core::kb::{Backtracking, Kb};
use epike_core::planlib::PlanLibrary;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("agent `{agent}`: {source}")]
    Session { agent: String, source: SessionError },
    #[error("expected {expected} agent kinds, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("unknown agent kind `{0}`")]
    UnknownKind(String),
    #[error("trace record {seq}: {reason}")]
    Replay { seq: u64, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Epike,
    Pike,
    /// Plays the given actions in order, one per poll, then waits.
    Scripted(Vec<WireAction>),
}

impl FromStr for AgentKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epike" => Ok(AgentKind::Epike),
            "pike" => Ok(AgentKind::Pike),
            _ => Err(SimError::UnknownKind(s.into())),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentKind::Epike => f.write_str("epike"),
            AgentKind::Pike => f.write_str("pike"),
            AgentKind::Scripted(_) => f.write_str("scripted"),
        }
    }
}

/// Budgets and switches of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub session: SessionConfig,
    pub seed: u64,
    /// Index of the agent polled first.
    pub ego: usize,
    pub max_actions: usize,
    pub wall_clock: Option<Duration>,
    /// Write `elapsed_ms` as 0 so traces compare byte for byte.
    pub record_timing: bool,
    /// Poll agents in a seeded random order instead of ego first, as if
    /// their response latencies varied.
    pub random_order: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            session: SessionConfig::default(),
            seed: 0,
            ego: 0,
            max_actions: 64,
            wall_clock: None,
            record_timing: true,
            random_order: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Success,
    Failure,
    Hang,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Success => "success",
            Verdict::Failure => "failure",
            Verdict::Hang => "hang",
        })
    }
}

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: u64,
    pub actor: String,
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub askee: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    pub elapsed_ms: u64,
}

impl TraceRecord {
    pub fn wire(&self) -> WireAction {
        WireAction {
            kind: self.kind,
            actor: self.actor.clone(),
            payload: self.payload.clone(),
            askee: self.askee.clone(),
            answer: self.answer,
        }
    }

    pub fn describe(&self) -> String {
        let mut s = format!("{} {}", self.actor, self.kind);
        for part in [&self.askee, &self.payload].into_iter().flatten() {
            s.push(' ');
            s.push_str(part);
        }
        if let Some(a) = self.answer {
            s.push_str(&format!(" -> {}", serde_json::to_value(a).unwrap().as_str().unwrap()));
        }
        s
    }
}

/// Time one agent spent deciding after an observation.
#[derive(Clone, Debug, Serialize)]
pub struct Callback {
    pub agent: String,
    pub millis: f64,
    pub acted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub trace: Vec<TraceRecord>,
    pub callbacks: Vec<Callback>,
    /// Agent state fingerprints after each trace record, by agent id.
    pub fingerprints: Vec<Vec<u64>>,
    /// Why the run stopped early, if it did.
    pub note: Option<String>,
}

impl RunOutcome {
    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
    }
}

/// Plays a fixed list of actions and otherwise tracks beliefs like the
/// epistemic agent, so it can answer questions.
pub struct ScriptedAgent {
    inner: AgentSession,
    script: VecDeque<PointedAction>,
}

impl ScriptedAgent {
    pub fn new(inner: AgentSession, script: Vec<PointedAction>) -> Self {
        ScriptedAgent {
            inner,
            script: script.into(),
        }
    }
}

impl Agent for ScriptedAgent {
    fn ego(&self) -> AgentId {
        self.inner.ego()
    }

    fn observe(&mut self, seq: u64, action: &PointedAction) -> Result<Option<PointedAction>, SessionError> {
        self.inner.observe(seq, action)
    }

    fn decide(&mut self) -> Result<Option<PointedAction>, SessionError> {
        Ok(self.script.pop_front())
    }

    fn believes_common_success(&self) -> Result<bool, SessionError> {
        self.inner.believes_common_success()
    }

    fn state(&self) -> &PointedState {
        self.inner.state()
    }

    fn last_report(&self) -> &DecisionReport {
        self.inner.last_report()
    }
}

pub fn make_agent(scenario: &Scenario, a: AgentId, kind: &AgentKind, cfg: &RunConfig) -> Result<Box<dyn Agent>, SimError> {
    let lib = scenario.lib.clone();
    let view = scenario.views[a.index()].clone();
    let session = cfg.session.clone();
    Ok(match kind {
        AgentKind::Epike => Box::new(AgentSession::new(lib, view, a, session, cfg.seed)),
        AgentKind::Pike => Box::new(PikeSession::new(lib, &view, a, session, cfg.seed)),
        AgentKind::Scripted(script) => {
            let actions = script
                .iter()
                .map(|w| PointedAction::decode(w, &scenario.lib))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SimError::Session {
                    agent: scenario.lib.agents()[a.index()].clone(),
                    source: e.into(),
                })?;
            Box::new(ScriptedAgent::new(AgentSession::new(lib, view, a, session, cfg.seed), actions))
        }
    })
}

/// The shared world: ground truth, agents, trace.
pub struct Simulation {
    lib: std::sync::Arc<PlanLibrary>,
    ground: Kb,
    executed: BTreeSet<usize>,
    agents: Vec<Box<dyn Agent>>,
    /// Agents whose moves come from outside and are never polled.
    external: Vec<bool>,
    order: Vec<usize>,
    replies: VecDeque<PointedAction>,
    seq: u64,
    record_timing: bool,
    shuffle: Option<ChaCha8Rng>,
    pub trace: Vec<TraceRecord>,
    pub callbacks: Vec<Callback>,
    pub fingerprints: Vec<Vec<u64>>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, agents: Vec<Box<dyn Agent>>, ego: usize, record_timing: bool) -> Self {
        let n = agents.len();
        let order = std::iter::once(ego).chain((0..n).filter(|&i| i != ego)).collect();
        Simulation {
            lib: scenario.lib.clone(),
            ground: scenario.ground().clone(),
            executed: BTreeSet::new(),
            agents,
            external: vec![false; n],
            order,
            replies: VecDeque::new(),
            seq: 0,
            record_timing,
            shuffle: None,
            trace: Vec::new(),
            callbacks: Vec::new(),
            fingerprints: Vec::new(),
        }
    }

    /// Shuffles the poll order before every round.
    pub fn randomize_order(&mut self, seed: u64) {
        self.shuffle = Some(ChaCha8Rng::seed_from_u64(seed));
    }

    pub fn set_external(&mut self, a: AgentId) {
        self.external[a.index()] = true;
    }

    pub fn lib(&self) -> &PlanLibrary {
        &self.lib
    }

    pub fn agent(&self, a: AgentId) -> &dyn Agent {
        self.agents[a.index()].as_ref()
    }

    pub fn ground(&self) -> &Kb {
        &self.ground
    }

    pub fn next_seq(&self) -> u64 {
        self.seq
    }

    fn name(&self, i: usize) -> String {
        self.lib.agents()[i].clone()
    }

    /// Broadcasts `action`: ground truth first, then every agent observes.
    /// Replies from non-external askees are queued.
    pub fn apply(&mut self, action: &PointedAction, elapsed: Duration) -> Result<(), SimError> {
        match (&action.kind, &action.payload) {
            (ActionKind::Execute, Payload::TimePoint(tp)) => {
                self.ground = self
                    .lib
                    .record_execution(&self.ground, *tp, &self.executed)
                    .expect("library time points are valid");
                self.executed.insert(*tp);
            }
            (ActionKind::Intent, Payload::Constraint(c)) => {
                self.ground = self.ground.add(c.clone()).expect("intent constraints are well formed");
            }
            _ => {}
        }
        let wire = action.encode(&self.lib);
        self.trace.push(TraceRecord {
            seq: self.seq,
            actor: wire.actor,
            kind: wire.kind,
            payload: wire.payload,
            askee: wire.askee,
            answer: wire.answer,
            elapsed_ms: if self.record_timing { elapsed.as_millis() as u64 } else { 0 },
        });
        for i in 0..self.agents.len() {
            let reply = self.agents[i].observe(self.seq, action).map_err(|source| SimError::Session {
                agent: self.name(i),
                source,
            })?;
            if let Some(r) = reply {
                if !self.external[i] {
                    self.replies.push_back(r);
                }
            }
        }
        self.fingerprints.push(self.agents.iter().map(|a| a.state().fingerprint()).collect());
        self.seq += 1;
        Ok(())
    }

    /// Sends the next queued reply or polls agents in order; returns whether
    /// anything was broadcast.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if let Some(r) = self.replies.pop_front() {
            self.apply(&r, Duration::ZERO)?;
            return Ok(true);
        }
        if let Some(rng) = &mut self.shuffle {
            self.order.shuffle(rng);
        }
        for k in 0..self.order.len() {
            let i = self.order[k];
            if self.external[i] {
                continue;
            }
            let started = Instant::now();
            let choice = self.agents[i].decide().map_err(|source| SimError::Session {
                agent: self.name(i),
                source,
            })?;
            let elapsed = started.elapsed();
            if self.agents[i].last_report().subroutine.is_some() {
                self.callbacks.push(Callback {
                    agent: self.name(i),
                    millis: elapsed.as_secs_f64() * 1000.0,
                    acted: choice.is_some(),
                });
            }
            if let Some(action) = choice {
                self.apply(&action, elapsed)?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn failed(&self) -> bool {
        !self.ground.consistent()
    }

    pub fn succeeded(&self) -> Result<bool, SimError> {
        if !self.lib.success_holds(&self.ground, &Backtracking) {
            return Ok(false);
        }
        for (i, a) in self.agents.iter().enumerate() {
            let believes = a.believes_common_success().map_err(|source| SimError::Session {
                agent: self.name(i),
                source,
            })?;
            if !believes {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Verdict of a quiescent run.
    pub fn verdict(&self) -> Result<Verdict, SimError> {
        Ok(if self.failed() {
            Verdict::Failure
        } else if self.succeeded()? {
            Verdict::Success
        } else {
            Verdict::Hang
        })
    }
}

/// Runs two or more agents on a scenario until nobody acts, a cap is hit or
/// an agent errs.
pub fn run_pair(scenario: &Scenario, kinds: &[AgentKind], cfg: &RunConfig) -> Result<RunOutcome, SimError> {
    let n = scenario.lib.agents().len();
    if kinds.len() != n {
        return Err(SimError::AgentCount {
            expected: n,
            got: kinds.len(),
        });
    }
    let agents = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| make_agent(scenario, AgentId(i as u16), k, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sim = Simulation::new(scenario, agents, cfg.ego, cfg.record_timing);
    if cfg.random_order {
        sim.randomize_order(cfg.seed);
    }
    let started = Instant::now();
    let mut note = None;
    let outcome = (|| -> Result<Verdict, SimError> {
        for a in &scenario.prefix {
            sim.apply(a, Duration::ZERO)?;
        }
        loop {
            if sim.trace.len() >= cfg.max_actions + scenario.prefix.len() {
                note = Some(format!("stopped after {} actions", cfg.max_actions));
                return Ok(if sim.failed() { Verdict::Failure } else { Verdict::Hang });
            }
            if cfg.wall_clock.is_some_and(|w| started.elapsed() >= w) {
                note = Some("wall-clock cap reached".into());
                return Ok(if sim.failed() { Verdict::Failure } else { Verdict::Hang });
            }
            if !sim.step()? {
                return sim.verdict();
            }
        }
    })();
    let verdict = match outcome {
        Ok(v) => v,
        Err(SimError::Session { agent, source }) => {
            note = Some(format!("agent `{agent}` stopped: {source}"));
            if sim.failed() {
                Verdict::Failure
            } else {
                Verdict::Hang
            }
        }
        Err(e) => return Err(e),
    };
    Ok(RunOutcome {
        verdict,
        trace: sim.trace,
        callbacks: sim.callbacks,
        fingerprints: sim.fingerprints,
        note,
    })
}

/// Feeds a recorded trace through fresh agents and returns the state
/// fingerprints after each record.
pub fn replay(scenario: &Scenario, kinds: &[AgentKind], cfg: &RunConfig, trace: &[TraceRecord]) -> Result<Vec<Vec<u64>>, SimError> {
    let agents = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| make_agent(scenario, AgentId(i as u16), k, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sim = Simulation::new(scenario, agents, cfg.ego, false);
    for i in 0..kinds.len() {
        sim.set_external(AgentId(i as u16));
    }
    for r in trace {
        let action = PointedAction::decode(&r.wire(), &scenario.lib).map_err(|e| SimError::Replay {
            seq: r.seq,
            reason: e.to_string(),
        })?;
        sim.apply(&action, Duration::ZERO)?;
    }
    Ok(sim.fingerprints)
}
