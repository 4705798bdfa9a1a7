//! Plausibility action models for execution, intent, explanation, questions
//! and answers, applied to states by action-priority update.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doxastic::{AgentId, DoxError, DoxFormula, FormulaContext, PlausibilityModel, PointedState, Preorder, World};
use crate::kb::{Constraint, KbError, ParseError, Solver};
use crate::planlib::{PlanError, PlanLibrary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("no designated world admits a designated event")]
    Inapplicable,
    #[error("`{0}` is outside the explainable fragment (negation, plain belief, membership)")]
    Restricted(String),
    #[error("an agent cannot ask itself")]
    SelfQuestion,
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("malformed wire action: {0}")]
    Wire(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Dox(#[from] DoxError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Post {
    Noop,
    Add(Constraint),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub id: String,
    pub pre: DoxFormula,
    pub post: Post,
}

/// Event plausibility, shared by every agent or given per agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventOrder {
    Uniform(Preorder),
    PerAgent(Vec<Preorder>),
}

impl EventOrder {
    pub fn for_agent(&self, a: AgentId) -> &Preorder {
        match self {
            EventOrder::Uniform(p) => p,
            EventOrder::PerAgent(ps) => &ps[a.index()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionModel {
    pub events: Vec<Event>,
    pub order: EventOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Execute,
    Intent,
    Explain,
    Ask,
    Answer,
    Noop,
}

impl ActionKind {
    pub fn is_communication(self) -> bool {
        matches!(self, ActionKind::Intent | ActionKind::Explain | ActionKind::Ask | ActionKind::Answer)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Execute => "execute",
            ActionKind::Intent => "intent",
            ActionKind::Explain => "explain",
            ActionKind::Ask => "ask",
            ActionKind::Answer => "answer",
            ActionKind::Noop => "noop",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Payload {
    None,
    TimePoint(usize),
    Constraint(Constraint),
    Formula(DoxFormula),
}

/// An action model with designated events plus what it means at the task
/// level: who did what.
#[derive(Clone, Debug)]
pub struct PointedAction {
    pub model: Arc<ActionModel>,
    pub designated: Vec<usize>,
    pub kind: ActionKind,
    pub actor: AgentId,
    pub payload: Payload,
    /// Addressee of a question.
    pub askee: Option<AgentId>,
    pub answer: Option<Answer>,
}

impl PartialEq for PointedAction {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.actor == other.actor
            && self.payload == other.payload
            && self.askee == other.askee
            && self.answer == other.answer
    }
}

impl Eq for PointedAction {}

impl std::hash::Hash for PointedAction {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
        self.actor.hash(state);
        self.payload.hash(state);
        self.askee.hash(state);
        self.answer.hash(state);
    }
}

fn single(kind: ActionKind, actor: AgentId, payload: Payload, event: Event) -> PointedAction {
    PointedAction {
        model: Arc::new(ActionModel {
            events: vec![event],
            order: EventOrder::Uniform(Preorder::identity(1)),
        }),
        designated: vec![0],
        kind,
        actor,
        payload,
        askee: None,
        answer: None,
    }
}

/// Execution of `tp` by its owner. One equi-plausible event per subset of
/// its distinct predecessors that may still be unexecuted.
pub fn mk_execution_action(lib: &PlanLibrary, tp: usize) -> PointedAction {
    let point = &lib.timepoints()[tp];
    let actor = point.owner;
    let feasible = DoxFormula::belief(actor, DoxFormula::sat(lib.executed(tp)));
    let preds = lib.predecessors(tp);
    let mut events = Vec::with_capacity(1 << preds.len());
    for mask in 0u32..(1u32 << preds.len()) {
        let open = |i: usize| mask & (1 << i) != 0;
        let mut pre = vec![feasible.clone()];
        let mut names = Vec::new();
        for (i, (p, _)) in preds.iter().enumerate() {
            let done = DoxFormula::entailed(lib.executed(*p));
            if open(i) {
                pre.push(DoxFormula::not(done));
                names.push(lib.timepoints()[*p].id.as_str());
            } else {
                pre.push(done);
            }
        }
        let post = lib.execution_effect(tp, |p| preds.iter().position(|(q, _)| *q == p).is_some_and(open));
        let id = if preds.is_empty() {
            point.id.clone()
        } else {
            format!("{}[{}]", point.id, names.join(","))
        };
        events.push(Event {
            id,
            pre: if pre.len() == 1 { pre.pop().unwrap() } else { DoxFormula::And(pre) },
            post: Post::Add(post),
        });
    }
    let n = events.len();
    PointedAction {
        model: Arc::new(ActionModel {
            events,
            order: EventOrder::Uniform(Preorder::total_equi(n)),
        }),
        designated: (0..n).collect(),
        kind: ActionKind::Execute,
        actor,
        payload: Payload::TimePoint(tp),
        askee: None,
        answer: None,
    }
}

pub fn mk_intent_announcement(actor: AgentId, c: Constraint) -> PointedAction {
    let event = Event {
        id: "intent".into(),
        pre: DoxFormula::belief(actor, DoxFormula::sat(c.clone())),
        post: Post::Add(c.clone()),
    };
    single(ActionKind::Intent, actor, Payload::Constraint(c), event)
}

pub fn mk_explanation(actor: AgentId, f: DoxFormula) -> Result<PointedAction, ActionError> {
    if !f.is_explainable() {
        return Err(ActionError::Restricted(format!("{f:?}")));
    }
    let event = Event {
        id: "explain".into(),
        pre: DoxFormula::belief(actor, f.clone()),
        post: Post::Noop,
    };
    Ok(single(ActionKind::Explain, actor, Payload::Formula(f), event))
}

fn answer_pre(askee: AgentId, f: &DoxFormula, answer: Answer) -> DoxFormula {
    let yes = DoxFormula::belief(askee, f.clone());
    let no = DoxFormula::belief(askee, DoxFormula::not(f.clone()));
    match answer {
        Answer::Yes => yes,
        Answer::No => no,
        Answer::Unknown => DoxFormula::and([DoxFormula::not(yes), DoxFormula::not(no)]),
    }
}

/// A question as seen before the reply: three distinguishable events, one
/// per possible truthful answer.
pub fn mk_question(asker: AgentId, askee: AgentId, f: DoxFormula) -> Result<PointedAction, ActionError> {
    if asker == askee {
        return Err(ActionError::SelfQuestion);
    }
    if !f.is_explainable() {
        return Err(ActionError::Restricted(format!("{f:?}")));
    }
    let events = [(Answer::Yes, "yes"), (Answer::No, "no"), (Answer::Unknown, "unknown")]
        .into_iter()
        .map(|(a, id)| Event {
            id: id.into(),
            pre: answer_pre(askee, &f, a),
            post: Post::Noop,
        })
        .collect();
    Ok(PointedAction {
        model: Arc::new(ActionModel {
            events,
            order: EventOrder::Uniform(Preorder::identity(3)),
        }),
        designated: vec![0, 1, 2],
        kind: ActionKind::Ask,
        actor: asker,
        payload: Payload::Formula(f),
        askee: Some(askee),
        answer: None,
    })
}

/// The askee's public reply: an announcement that it believes `f`, believes
/// `¬f`, or neither.
pub fn mk_answer(askee: AgentId, f: DoxFormula, answer: Answer) -> Result<PointedAction, ActionError> {
    if !f.is_explainable() {
        return Err(ActionError::Restricted(format!("{f:?}")));
    }
    let event = Event {
        id: format!("answer-{}", answer_text(answer)),
        pre: answer_pre(askee, &f, answer),
        post: Post::Noop,
    };
    let mut act = single(ActionKind::Answer, askee, Payload::Formula(f), event);
    act.answer = Some(answer);
    Ok(act)
}

fn answer_text(a: Answer) -> &'static str {
    match a {
        Answer::Yes => "yes",
        Answer::No => "no",
        Answer::Unknown => "unknown",
    }
}

/// What `askee` truthfully answers about `f` in `state`.
pub fn truthful_answer(
    state: &PointedState,
    askee: AgentId,
    f: &DoxFormula,
    solver: &dyn Solver,
) -> Result<Answer, DoxError> {
    for a in [Answer::Yes, Answer::No] {
        if state.satisfies(&answer_pre(askee, f, a), solver)? {
            return Ok(a);
        }
    }
    Ok(Answer::Unknown)
}

pub fn mk_noop(actor: AgentId) -> PointedAction {
    let event = Event {
        id: "noop".into(),
        pre: DoxFormula::Top,
        post: Post::Noop,
    };
    single(ActionKind::Noop, actor, Payload::None, event)
}

/// Result of an update: the new state and, for every new world, the
/// (parent world, event) pair it came from.
#[derive(Clone, Debug)]
pub struct Updated {
    pub state: PointedState,
    pub origin: Vec<(usize, usize)>,
}

/// True iff every designated world admits some designated event.
pub fn applicable(s: &PointedState, act: &PointedAction, solver: &dyn Solver) -> Result<bool, DoxError> {
    let pres = pre_sets(&s.model, act, solver)?;
    Ok(s
        .designated()
        .iter()
        .all(|&w| act.designated.iter().any(|&e| pres[e].contains(w))))
}

fn pre_sets(m: &PlausibilityModel, act: &PointedAction, solver: &dyn Solver) -> Result<Vec<Arc<FixedBitSet>>, DoxError> {
    act.model.events.iter().map(|e| m.truth_set(&e.pre, solver)).collect()
}

fn is_identity(act: &PointedAction) -> bool {
    matches!(&act.model.events[..], [Event { pre: DoxFormula::Top, post: Post::Noop, .. }])
}

/// Action-priority update `s ⊗ act`.
///
/// `(w,σ) ≤_a (v,τ)` iff `σ <_a τ` and `v ∈ cc_a(w)`, or `σ ≃_a τ` and
/// `w ≤_a v`. Worlds unreachable from the designated pairs through any
/// agent's components are dropped. A single trivial event returns the state
/// unchanged.
pub fn product_update(s: &PointedState, act: &PointedAction, solver: &dyn Solver) -> Result<Updated, ActionError> {
    if is_identity(act) {
        return Ok(Updated {
            state: s.clone(),
            origin: (0..s.model.len()).map(|w| (w, 0)).collect(),
        });
    }
    let m = &s.model;
    let events = &act.model.events;
    let pres = pre_sets(m, act, solver)?;
    let n = m.len();
    let ne = events.len();
    let idx = |w: usize, e: usize| w * ne + e;
    let alive = |w: usize, e: usize| pres[e].contains(w);

    let mut reached = FixedBitSet::with_capacity(n * ne);
    let mut queue = VecDeque::new();
    for &w in s.designated() {
        for &e in &act.designated {
            if alive(w, e) {
                reached.insert(idx(w, e));
                queue.push_back((w, e));
            }
        }
    }
    if queue.is_empty() {
        return Err(ActionError::Inapplicable);
    }
    let designated_pairs: Vec<(usize, usize)> = queue.iter().copied().collect();
    while let Some((w, e)) = queue.pop_front() {
        for a in m.agent_ids() {
            let eo = act.model.order.for_agent(a);
            for v in m.cc(a, w).ones() {
                for f in 0..ne {
                    if alive(v, f) && eo.comparable(e, f) && !reached.contains(idx(v, f)) {
                        reached.insert(idx(v, f));
                        queue.push_back((v, f));
                    }
                }
            }
        }
    }
    let origin: Vec<(usize, usize)> = reached.ones().map(|i| (i / ne, i % ne)).collect();

    let worlds: Vec<World> = origin
        .iter()
        .map(|&(w, e)| {
            let parent = m.world(w);
            let kb = match &events[e].post {
                Post::Noop => parent.kb.clone(),
                Post::Add(c) => parent.kb.add_unchecked(c.clone()),
            };
            World::new(format!("{}⊗{}", parent.id, events[e].id), kb)
        })
        .collect();
    let k = origin.len();
    let order: Vec<Preorder> = m
        .agent_ids()
        .map(|a| {
            let p = m.order(a);
            let eo = act.model.order.for_agent(a);
            let mut out = Preorder::empty(k);
            for (i, &(w, e)) in origin.iter().enumerate() {
                for (j, &(v, f)) in origin.iter().enumerate() {
                    let le = (eo.strict(e, f) && m.component_id(a, w) == m.component_id(a, v))
                        || (eo.equi(e, f) && p.le(w, v));
                    if le {
                        out.set(i, j);
                    }
                }
            }
            out
        })
        .collect();
    let model = PlausibilityModel::build(m.agents().clone(), worlds, order);
    let designated = designated_pairs
        .iter()
        .map(|&(w, e)| origin.binary_search(&(w, e)).unwrap());
    let state = PointedState::new(model, designated)?;
    Ok(Updated { state, origin })
}

/// Whether applying `act` makes some agent promote a world it did not find
/// most plausible before: for a designated world `d` and agent `b`, a world
/// in `b`'s most plausible set around the image of `d` whose parent lies
/// outside `min_b(cc_b(d))`.
pub fn detect_implicit_revision(before: &PointedState, act: &PointedAction, solver: &dyn Solver) -> Result<bool, ActionError> {
    if !matches!(act.kind, ActionKind::Execute | ActionKind::Intent) {
        return Ok(false);
    }
    let up = product_update(before, act, solver)?;
    Ok(revises(before, &up))
}

pub(crate) fn revises(before: &PointedState, up: &Updated) -> bool {
    let old = &before.model;
    let new = &up.state.model;
    for &d2 in up.state.designated() {
        let d = up.origin[d2].0;
        for b in old.agent_ids() {
            let prior = old.cc_min(b, d);
            if new.cc_min(b, d2).ones().any(|x| !prior.contains(up.origin[x].0)) {
                return true;
            }
        }
    }
    false
}

/// Wire form of an action: kind, actor, payload text and, for questions and
/// answers, the addressee and the reply.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireAction {
    pub kind: ActionKind,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub askee: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
}

impl PointedAction {
    pub fn encode(&self, lib: &PlanLibrary) -> WireAction {
        let ctx = FormulaContext::new(lib.schema(), lib.agents()).with_success(lib.success_condition());
        let payload = match &self.payload {
            Payload::None => None,
            Payload::TimePoint(tp) => Some(lib.timepoints()[*tp].id.clone()),
            Payload::Constraint(c) => Some(lib.schema().render(c)),
            Payload::Formula(f) => Some(ctx.render(f)),
        };
        WireAction {
            kind: self.kind,
            actor: lib.agents()[self.actor.index()].clone(),
            payload,
            askee: self.askee.map(|a| lib.agents()[a.index()].clone()),
            answer: self.answer,
        }
    }

    pub fn decode(wire: &WireAction, lib: &PlanLibrary) -> Result<PointedAction, ActionError> {
        let agent = |name: &str| lib.agent(name).ok_or_else(|| ActionError::UnknownAgent(name.to_string()));
        let actor = agent(&wire.actor)?;
        let payload = || {
            wire.payload
                .as_deref()
                .ok_or_else(|| ActionError::Wire(format!("{} needs a payload", wire.kind)))
        };
        let formula = || -> Result<DoxFormula, ActionError> {
            let ctx = FormulaContext::new(lib.schema(), lib.agents()).with_success(lib.success_condition());
            Ok(ctx.parse(payload()?)?)
        };
        if wire.askee.is_some() && wire.kind != ActionKind::Ask {
            return Err(ActionError::Wire("only questions have an askee".into()));
        }
        if wire.answer.is_some() != (wire.kind == ActionKind::Answer) {
            return Err(ActionError::Wire("answers, and only answers, carry a reply".into()));
        }
        match wire.kind {
            ActionKind::Execute => {
                let tp = lib.timepoint(payload()?)?;
                if lib.timepoints()[tp].owner != actor {
                    return Err(ActionError::Wire(format!(
                        "`{}` is not owned by `{}`",
                        lib.timepoints()[tp].id,
                        wire.actor
                    )));
                }
                Ok(mk_execution_action(lib, tp))
            }
            ActionKind::Intent => {
                let c = lib.schema().parse(payload()?)?;
                Ok(mk_intent_announcement(actor, c))
            }
            ActionKind::Explain => mk_explanation(actor, formula()?),
            ActionKind::Ask => {
                let askee = agent(
                    wire.askee
                        .as_deref()
                        .ok_or_else(|| ActionError::Wire("question without askee".into()))?,
                )?;
                mk_question(actor, askee, formula()?)
            }
            ActionKind::Answer => mk_answer(actor, formula()?, wire.answer.unwrap()),
            ActionKind::Noop => {
                if wire.payload.is_some() {
                    return Err(ActionError::Wire("noop takes no payload".into()));
                }
                Ok(mk_noop(actor))
            }
        }
    }

    /// Short human-readable form, e.g. `R execute e_mug`.
    pub fn describe(&self, lib: &PlanLibrary) -> String {
        let w = self.encode(lib);
        let mut s = format!("{} {}", w.actor, w.kind);
        if let Some(askee) = &w.askee {
            s.push_str(&format!(" {askee}"));
        }
        if let Some(p) = &w.payload {
            s.push(' ');
            s.push_str(p);
        }
        if let Some(a) = w.answer {
            s.push_str(&format!(" -> {}", answer_text(a)));
        }
        s
    }
}

#[cfg(test)]
mod tests;
