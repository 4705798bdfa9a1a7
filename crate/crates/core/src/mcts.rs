//! k-step lookahead tree search over doxastic states.
//!
//! Four node types: the root decision node (the searching agent's own
//! view), split nodes (worst case over the designated worlds an action
//! leads to), predict nodes (which agent acts next, from one world) and
//! decision nodes (an agent's choice from its own perspective). Every
//! non-root action gets a subjective child, updated from the deciding
//! agent's perspective, and an objective child, updated from the world the
//! predict node sits in.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::actions::{mk_execution_action, product_update, revises, ActionError, ActionKind, PointedAction, Updated};
use crate::doxastic::{AgentId, DoxError, DoxFormula, PointedState};
use crate::executor::{candidate_actions, feasible_executions};
use crate::kb::Solver;
use crate::planlib::PlanLibrary;

/// Scores closer than this count as tied.
pub const TIE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Dox(#[from] DoxError),
    #[error(transparent)]
    Action(#[from] ActionError),
}

/// A set of action kinds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct KindSet(u8);

impl KindSet {
    pub const EMPTY: KindSet = KindSet(0);

    pub fn of(kinds: &[ActionKind]) -> Self {
        KindSet(kinds.iter().fold(0, |acc, k| acc | Self::bit(*k)))
    }

    fn bit(k: ActionKind) -> u8 {
        1 << k as u8
    }

    pub fn contains(self, k: ActionKind) -> bool {
        self.0 & Self::bit(k) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn without(self, k: ActionKind) -> Self {
        KindSet(self.0 & !Self::bit(k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalties {
    pub execute: f64,
    pub noop: f64,
    pub intent: f64,
    pub explain: f64,
    pub ask: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            execute: 1.0,
            noop: 1.0,
            intent: 0.85,
            explain: 0.9,
            ask: 0.9,
        }
    }
}

impl Penalties {
    pub fn factor(&self, kind: ActionKind) -> f64 {
        match kind {
            ActionKind::Execute => self.execute,
            ActionKind::Noop => self.noop,
            ActionKind::Intent => self.intent,
            ActionKind::Explain | ActionKind::Answer => self.explain,
            ActionKind::Ask => self.ask,
        }
    }
}

/// When a branch of the tree stops and with what utility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Termination {
    /// 0 on failure, 1 on success or after `horizon` executions.
    SearchAction,
    /// 1 once every agent believes the task failed.
    ExplainFailure,
    /// 1 once the searching agent is sure whether the task failed.
    AskIfFailure,
    /// 1 once every agent believes the task succeeded.
    ExplainSuccess,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub horizon: u32,
    pub exploration: f64,
    pub penalties: Penalties,
    pub ego_kinds: KindSet,
    pub other_kinds: KindSet,
    pub termination: Termination,
    pub iteration_cap: u32,
    pub time_budget: Option<Duration>,
    pub veto_implicit_revision: bool,
    /// Actions along one path before a predict node stops expanding.
    pub max_tree_depth: u32,
    /// Stop as soon as every leaf of the tree is terminal.
    pub stop_when_solved: bool,
    pub record_trace: bool,
    /// Pick the best positive non-noop action even when waiting scores higher.
    pub prefer_action: bool,
    /// Belief nesting for explanation and question payloads.
    pub explanation_depth: usize,
}

impl SearchConfig {
    pub fn for_subroutine(termination: Termination) -> Self {
        use ActionKind::*;
        let (ego, other, exploration) = match termination {
            Termination::SearchAction => (
                KindSet::of(&[Execute, Noop, Intent, Explain, Ask]),
                KindSet::of(&[Execute, Noop, Explain]),
                4.0,
            ),
            Termination::ExplainFailure | Termination::ExplainSuccess => {
                (KindSet::of(&[Explain, Ask]), KindSet::EMPTY, std::f64::consts::SQRT_2)
            }
            Termination::AskIfFailure => (KindSet::of(&[Ask]), KindSet::EMPTY, std::f64::consts::SQRT_2),
        };
        SearchConfig {
            horizon: 3,
            exploration,
            penalties: Penalties::default(),
            ego_kinds: ego,
            other_kinds: other,
            termination,
            iteration_cap: 1000,
            time_budget: None,
            veto_implicit_revision: true,
            max_tree_depth: 8,
            stop_when_solved: true,
            record_trace: false,
            prefer_action: false,
            explanation_depth: 1,
        }
    }

    /// Same configuration restricted to executions and waiting.
    pub fn without_communication(mut self) -> Self {
        for k in [ActionKind::Intent, ActionKind::Explain, ActionKind::Ask] {
            self.ego_kinds = self.ego_kinds.without(k);
            self.other_kinds = self.other_kinds.without(k);
        }
        self
    }
}

pub struct SearchContext<'a> {
    pub lib: &'a PlanLibrary,
    pub solver: &'a dyn Solver,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Choice {
    Act(PointedAction),
    Noop,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    IterationCap,
    TimeBudget,
    Solved,
    NoCandidates,
}

#[derive(Clone, Debug)]
pub struct RootScore {
    pub action: PointedAction,
    pub score: f64,
    pub visits: u32,
}

/// One iteration of the search: the node path walked and the value of the
/// last node reached.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub path: Vec<u32>,
    pub labels: Vec<String>,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub choice: Choice,
    pub iterations: u32,
    pub stop: StopReason,
    pub root: Vec<RootScore>,
    pub trace: Vec<IterationRecord>,
}

/// Subjective and objective score of one action at a decision node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionScore {
    pub kind: ActionKind,
    pub sc: f64,
    pub oc: f64,
}

/// What a decision node tells its predict parent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionValue {
    pub p_noop: f64,
    pub expected: f64,
}

/// The agent picks uniformly among its best actions: those of maximal
/// positive subjective score, without noop when some execution scores 1.
/// Waiting is worth nothing objectively. With no positive action the agent
/// is taken to wait.
pub fn decision_value(actions: &[ActionScore]) -> DecisionValue {
    let perfect = actions.iter().any(|a| a.kind == ActionKind::Execute && a.sc >= 1.0 - TIE);
    let eligible = |a: &&ActionScore| a.sc > 0.0 && !(perfect && a.kind == ActionKind::Noop);
    let best = actions.iter().filter(eligible).map(|a| a.sc).fold(0.0, f64::max);
    if best <= 0.0 {
        return DecisionValue {
            p_noop: 1.0,
            expected: 0.0,
        };
    }
    let chosen: Vec<&ActionScore> = actions.iter().filter(eligible).filter(|a| a.sc >= best - TIE).collect();
    let total: f64 = chosen.iter().map(|a| a.sc).sum();
    let mut p_noop = 0.0;
    let mut expected = 0.0;
    for a in chosen {
        let p = a.sc / total;
        if a.kind == ActionKind::Noop {
            p_noop += p;
        } else {
            expected += p * a.oc;
        }
    }
    DecisionValue { p_noop, expected }
}

pub fn backup_decision(actions: &[ActionScore]) -> f64 {
    decision_value(actions).expected
}

/// `(1 − Π P_a(noop)) · Σ E_a / Σ (1 − P_a(noop))`, and 0 when every agent
/// waits.
pub fn backup_predict(agents: &[DecisionValue]) -> f64 {
    let acting: f64 = agents.iter().map(|d| 1.0 - d.p_noop).sum();
    if acting <= 0.0 {
        return 0.0;
    }
    let all_wait: f64 = agents.iter().map(|d| d.p_noop).product();
    let expected: f64 = agents.iter().map(|d| d.expected).sum();
    (1.0 - all_wait) * expected / acting
}

pub fn backup_split(children: &[f64], penalty: f64) -> f64 {
    penalty * children.iter().copied().fold(f64::INFINITY, f64::min).min(1.0)
}

/// UCB1; unvisited children score infinity.
pub fn ucb1(exploit: f64, c: f64, parent_visits: u32, child_visits: u32) -> f64 {
    if child_visits == 0 {
        return f64::INFINITY;
    }
    exploit + c * ((parent_visits.max(1) as f64).ln() / child_visits as f64).sqrt()
}

/// Index of the split child to descend into, worst score first. Ties go to
/// the earlier child.
pub fn select_split_child(children: &[(f64, u32)], c: f64, parent_visits: u32) -> Option<usize> {
    argmax(children.iter().map(|&(v, n)| ucb1(1.0 - v, c, parent_visits, n)))
}

/// Whether to descend into the subjective side: it is the less visited one,
/// ties included.
pub fn prefer_subjective(subjective_visits: u32, objective_visits: u32) -> bool {
    subjective_visits <= objective_visits
}

fn argmax(it: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in it.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Utility of a global state if the branch ends there.
pub fn terminal_utility(
    state: &PointedState,
    termination: Termination,
    ego: AgentId,
    horizon: u32,
    depth: u32,
    solver: &dyn Solver,
    success: &DoxFormula,
) -> Result<Option<f64>, DoxError> {
    let agents: Vec<AgentId> = state.model.agent_ids().collect();
    let failed = DoxFormula::failed();
    Ok(match termination {
        Termination::SearchAction => {
            if state.satisfies(&failed, solver)? {
                Some(0.0)
            } else if state.satisfies(success, solver)? || depth >= horizon {
                Some(1.0)
            } else {
                None
            }
        }
        Termination::ExplainFailure => state
            .satisfies(&DoxFormula::everyone_believes(agents, &failed), solver)?
            .then_some(1.0),
        Termination::AskIfFailure => {
            let sure = DoxFormula::or([
                DoxFormula::belief(ego, failed.clone()),
                DoxFormula::belief(ego, DoxFormula::not(failed)),
            ]);
            state.satisfies(&sure, solver)?.then_some(1.0)
        }
        Termination::ExplainSuccess => state
            .satisfies(&DoxFormula::everyone_believes(agents, success), solver)?
            .then_some(1.0),
    })
}

/// Random playout from a global state: agents in random order, each trying
/// a uniformly chosen execution feasible from its own perspective, until a
/// terminal utility applies. 0 when nobody can execute anything.
pub fn simulate<R: Rng>(
    state: &PointedState,
    ego: AgentId,
    cfg: &SearchConfig,
    ctx: &SearchContext<'_>,
    depth: u32,
    rng: &mut R,
) -> Result<f64, SearchError> {
    let success = DoxFormula::Succeeded(ctx.lib.success_condition().clone());
    rollout(state, ego, cfg, ctx, &success, depth, AgentSet::default(), rng)
}

/// Agents in `waiting` sit out the first step.
#[allow(clippy::too_many_arguments)]
fn rollout<R: Rng>(
    start: &PointedState,
    ego: AgentId,
    cfg: &SearchConfig,
    ctx: &SearchContext<'_>,
    success: &DoxFormula,
    mut depth: u32,
    mut waiting: AgentSet,
    rng: &mut R,
) -> Result<f64, SearchError> {
    let mut state = start.clone();
    let limit = ctx.lib.timepoints().len() as u32 + 1;
    for _ in 0..=limit {
        if let Some(u) = terminal_utility(&state, cfg.termination, ego, cfg.horizon, depth, ctx.solver, success)? {
            return Ok(u);
        }
        let kinds = |a: AgentId| if a == ego { cfg.ego_kinds } else { cfg.other_kinds };
        let mut order: Vec<AgentId> = state
            .model
            .agent_ids()
            .filter(|&a| !waiting.contains(a) && kinds(a).contains(ActionKind::Execute))
            .collect();
        order.shuffle(rng);
        let mut moved = false;
        for a in order {
            let view = state.local_perspective(a);
            let options = feasible_executions(&view, a, ctx.lib, ctx.solver);
            let Some(&tp) = options.choose(rng) else { continue };
            match product_update(&state, &mk_execution_action(ctx.lib, tp), ctx.solver) {
                Ok(up) => {
                    state = up.state.split_globals().swap_remove(0);
                    depth += 1;
                    moved = true;
                    break;
                }
                Err(ActionError::Inapplicable) => {}
                Err(e) => return Err(e.into()),
            }
        }
        if !moved {
            return Ok(0.0);
        }
        waiting = AgentSet::default();
    }
    Ok(0.0)
}

type NodeId = usize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct AgentSet(u64);

impl AgentSet {
    fn with(self, a: AgentId) -> Self {
        AgentSet(self.0 | 1 << a.0)
    }

    fn contains(self, a: AgentId) -> bool {
        self.0 & 1 << a.0 != 0
    }
}

struct Entry {
    action: PointedAction,
    subjective: Option<NodeId>,
    objective: Option<NodeId>,
    vetoed: bool,
}

struct Decision {
    agent: AgentId,
    root: bool,
    view: PointedState,
    /// The predict node's world; `None` at the root.
    world: Option<PointedState>,
    depth: u32,
    plies: u32,
    waiting: AgentSet,
    candidates: Vec<PointedAction>,
    pending: Vec<usize>,
    entries: Vec<Entry>,
    value: DecisionValue,
}

struct Split {
    penalty: f64,
    children: Vec<NodeId>,
}

struct Predict {
    state: PointedState,
    depth: u32,
    plies: u32,
    waiting: AgentSet,
    terminal: bool,
    frozen: bool,
    expanded: bool,
    children: Vec<NodeId>,
}

enum Kind {
    Decision(Box<Decision>),
    Split(Split),
    Predict(Box<Predict>),
}

struct Node {
    kind: Kind,
    label: String,
    visits: u32,
    value: f64,
    complete: bool,
}

struct Tree<'a, R: Rng> {
    nodes: Vec<Node>,
    ego: AgentId,
    cfg: &'a SearchConfig,
    ctx: &'a SearchContext<'a>,
    success: DoxFormula,
    rng: &'a mut R,
}

/// Runs the search from `state`, the ego agent's current state, and picks
/// the root action of highest positive score, preferring to act on ties.
pub fn search<R: Rng>(
    state: &PointedState,
    ego: AgentId,
    cfg: &SearchConfig,
    ctx: &SearchContext<'_>,
    rng: &mut R,
) -> Result<SearchOutcome, SearchError> {
    let started = Instant::now();
    let mut tree = Tree {
        nodes: Vec::new(),
        ego,
        cfg,
        ctx,
        success: DoxFormula::Succeeded(ctx.lib.success_condition().clone()),
        rng,
    };
    let root_view = state.most_plausible(ego);
    let root = tree.new_decision(ego, true, root_view, None, 0, 0, AgentSet::default())?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let stop = loop {
        if tree.decision(root).candidates.is_empty() {
            break StopReason::NoCandidates;
        }
        if cfg.stop_when_solved && tree.nodes[root].complete {
            break StopReason::Solved;
        }
        if iterations >= cfg.iteration_cap {
            break StopReason::IterationCap;
        }
        if cfg.time_budget.is_some_and(|b| started.elapsed() >= b) {
            break StopReason::TimeBudget;
        }
        let path = tree.iterate(root)?;
        iterations += 1;
        if cfg.record_trace {
            let last = *path.last().unwrap();
            trace.push(IterationRecord {
                iteration: iterations,
                path: path.iter().map(|&n| n as u32).collect(),
                labels: path.iter().map(|&n| tree.nodes[n].label.clone()).collect(),
                value: tree.nodes[last].value,
            });
        }
    };
    let root_scores: Vec<RootScore> = tree
        .decision(root)
        .entries
        .iter()
        .map(|e| RootScore {
            action: e.action.clone(),
            score: tree.entry_sc(e),
            visits: e.subjective.map_or(0, |n| tree.nodes[n].visits),
        })
        .collect();
    let choice = choose(&root_scores, cfg.prefer_action);
    Ok(SearchOutcome {
        choice,
        iterations,
        stop,
        root: root_scores,
        trace,
    })
}

fn choose(scores: &[RootScore], prefer_action: bool) -> Choice {
    let usable = |s: &&RootScore| s.score > 0.0 && !(prefer_action && s.action.kind == ActionKind::Noop);
    let best = scores.iter().filter(usable).map(|s| s.score).fold(0.0, f64::max);
    if best <= 0.0 {
        return Choice::None;
    }
    let tied: Vec<&RootScore> = scores.iter().filter(usable).filter(|s| s.score >= best - TIE).collect();
    match tied.iter().find(|s| s.action.kind != ActionKind::Noop) {
        Some(s) => Choice::Act(s.action.clone()),
        None => Choice::Noop,
    }
}

impl<R: Rng> Tree<'_, R> {
    fn decision(&self, n: NodeId) -> &Decision {
        match &self.nodes[n].kind {
            Kind::Decision(d) => d,
            _ => unreachable!("not a decision node"),
        }
    }

    fn kinds_for(&self, a: AgentId) -> KindSet {
        if a == self.ego {
            self.cfg.ego_kinds
        } else {
            self.cfg.other_kinds
        }
    }

    fn push(&mut self, kind: Kind, label: String, value: f64, complete: bool) -> NodeId {
        self.nodes.push(Node {
            kind,
            label,
            visits: 1,
            value,
            complete,
        });
        self.nodes.len() - 1
    }

    fn entry_sc(&self, e: &Entry) -> f64 {
        if e.vetoed {
            return 0.0;
        }
        e.subjective.map_or(0.0, |n| self.nodes[n].value)
    }

    fn entry_oc(&self, e: &Entry, root: bool) -> f64 {
        if e.vetoed || e.action.kind == ActionKind::Noop {
            return 0.0;
        }
        if root {
            return self.entry_sc(e);
        }
        e.objective.map_or(0.0, |n| self.nodes[n].value)
    }

    #[allow(clippy::too_many_arguments)]
    fn new_decision(
        &mut self,
        agent: AgentId,
        root: bool,
        view: PointedState,
        world: Option<PointedState>,
        depth: u32,
        plies: u32,
        waiting: AgentSet,
    ) -> Result<NodeId, SearchError> {
        let candidates = candidate_actions(
            &view,
            agent,
            self.kinds_for(agent),
            self.ctx.lib,
            self.ctx.solver,
            self.cfg.explanation_depth,
        )?;
        let pending = (0..candidates.len()).collect();
        let label = format!("decide {}", view.model.agent_name(agent));
        let d = Decision {
            agent,
            root,
            view,
            world,
            depth,
            plies,
            waiting,
            candidates,
            pending,
            entries: Vec::new(),
            value: DecisionValue {
                p_noop: 1.0,
                expected: 0.0,
            },
        };
        let n = self.push(Kind::Decision(Box::new(d)), label, 0.0, false);
        if !root {
            if let Some(i) = self.next_expandable(n) {
                self.expand_action(n, i)?;
            }
            self.nodes[n].visits = 0;
            self.refresh(n);
        }
        Ok(n)
    }

    /// Index into `pending` of the next candidate worth expanding. Noop is
    /// skipped while some execution scores 1, and a communication while an
    /// already expanded plain action scores at least its penalty.
    fn next_expandable(&self, n: NodeId) -> Option<usize> {
        let d = self.decision(n);
        let perfect = d
            .entries
            .iter()
            .any(|e| e.action.kind == ActionKind::Execute && self.entry_sc(e) >= 1.0 - TIE);
        let plain_best = d
            .entries
            .iter()
            .filter(|e| !e.action.kind.is_communication())
            .map(|e| self.entry_sc(e))
            .fold(0.0, f64::max);
        d.pending.iter().position(|&i| {
            let kind = d.candidates[i].kind;
            match kind {
                ActionKind::Noop => !perfect,
                k if k.is_communication() => self.cfg.penalties.factor(k) > plain_best + TIE,
                _ => true,
            }
        })
    }

    fn expand_action(&mut self, n: NodeId, pending_index: usize) -> Result<(), SearchError> {
        let (action, view, world, depth, plies, waiting, root, agent) = {
            let Kind::Decision(d) = &mut self.nodes[n].kind else { unreachable!() };
            let i = d.pending.remove(pending_index);
            (
                d.candidates[i].clone(),
                d.view.clone(),
                d.world.clone(),
                d.depth,
                d.plies,
                d.waiting,
                d.root,
                d.agent,
            )
        };
        let kind = action.kind;
        let next_depth = depth + u32::from(kind == ActionKind::Execute);
        let next_waiting = if kind == ActionKind::Noop {
            waiting.with(agent)
        } else {
            AgentSet::default()
        };
        let label = action.describe(self.ctx.lib);
        let mut entry = Entry {
            action: action.clone(),
            subjective: None,
            objective: None,
            vetoed: false,
        };
        match product_update(&view, &action, self.ctx.solver) {
            Err(ActionError::Inapplicable) => entry.vetoed = true,
            Err(e) => return Err(e.into()),
            Ok(up) => {
                let surprising = matches!(kind, ActionKind::Execute | ActionKind::Intent)
                    && self.cfg.veto_implicit_revision
                    && revises(&view, &up);
                if surprising {
                    entry.vetoed = true;
                } else {
                    let s = self.new_split(&up, kind, next_depth, plies + 1, next_waiting, format!("{label} (subjective)"))?;
                    entry.subjective = Some(s);
                    if let (false, Some(world), false) = (root, world, kind == ActionKind::Noop) {
                        match product_update(&world, &action, self.ctx.solver) {
                            Ok(up) => {
                                let o = self.new_split(
                                    &up,
                                    kind,
                                    next_depth,
                                    plies + 1,
                                    next_waiting,
                                    format!("{label} (objective)"),
                                )?;
                                entry.objective = Some(o);
                            }
                            Err(ActionError::Inapplicable) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
        }
        let Kind::Decision(d) = &mut self.nodes[n].kind else { unreachable!() };
        d.entries.push(entry);
        Ok(())
    }

    fn new_split(
        &mut self,
        up: &Updated,
        kind: ActionKind,
        depth: u32,
        plies: u32,
        waiting: AgentSet,
        label: String,
    ) -> Result<NodeId, SearchError> {
        let mut children = Vec::new();
        for g in up.state.split_globals() {
            children.push(self.new_predict(g, depth, plies, waiting)?);
        }
        let penalty = self.cfg.penalties.factor(kind);
        let n = self.push(Kind::Split(Split { penalty, children }), label, 0.0, false);
        self.refresh(n);
        Ok(n)
    }

    fn new_predict(&mut self, state: PointedState, depth: u32, plies: u32, waiting: AgentSet) -> Result<NodeId, SearchError> {
        let label = format!("predict {}", state.model.world(state.designated()[0]).id);
        let terminal = terminal_utility(
            &state,
            self.cfg.termination,
            self.ego,
            self.cfg.horizon,
            depth,
            self.ctx.solver,
            &self.success,
        )?;
        let deciders = self.deciders(&state, waiting);
        let (value, terminal) = match terminal {
            Some(u) => (u, true),
            None if deciders.is_empty() => (0.0, true),
            None => (self.rollout(&state, depth, waiting)?, false),
        };
        let frozen = !terminal && plies >= self.cfg.max_tree_depth;
        let p = Predict {
            state,
            depth,
            plies,
            waiting,
            terminal,
            frozen,
            expanded: false,
            children: Vec::new(),
        };
        Ok(self.push(Kind::Predict(Box::new(p)), label, value, terminal || frozen))
    }

    fn deciders(&self, state: &PointedState, waiting: AgentSet) -> Vec<AgentId> {
        state
            .model
            .agent_ids()
            .filter(|&a| !waiting.contains(a) && !self.kinds_for(a).is_empty())
            .collect()
    }

    fn expand_predict(&mut self, n: NodeId) -> Result<(), SearchError> {
        let (state, depth, plies, waiting) = {
            let Kind::Predict(p) = &self.nodes[n].kind else { unreachable!() };
            (p.state.clone(), p.depth, p.plies, p.waiting)
        };
        let mut children = Vec::new();
        for a in self.deciders(&state, waiting) {
            let view = state.local_perspective(a);
            children.push(self.new_decision(a, false, view, Some(state.clone()), depth, plies, waiting)?);
        }
        let Kind::Predict(p) = &mut self.nodes[n].kind else { unreachable!() };
        p.expanded = true;
        p.children = children;
        Ok(())
    }

    fn rollout(&mut self, start: &PointedState, depth: u32, waiting: AgentSet) -> Result<f64, SearchError> {
        rollout(start, self.ego, self.cfg, self.ctx, &self.success, depth, waiting, self.rng)
    }

    /// One selection, expansion and backup pass; returns the path.
    fn iterate(&mut self, root: NodeId) -> Result<Vec<NodeId>, SearchError> {
        let mut path = vec![root];
        let mut cur = root;
        loop {
            if self.nodes[cur].complete {
                break;
            }
            let next = match &self.nodes[cur].kind {
                Kind::Decision(_) => {
                    if let Some(i) = self.next_expandable(cur) {
                        self.expand_action(cur, i)?;
                        break;
                    }
                    self.select_action(cur)
                }
                Kind::Split(s) => {
                    let open: Vec<NodeId> = s.children.iter().copied().filter(|&c| !self.nodes[c].complete).collect();
                    let stats: Vec<(f64, u32)> = open.iter().map(|&c| (self.nodes[c].value, self.nodes[c].visits)).collect();
                    select_split_child(&stats, self.cfg.exploration, self.nodes[cur].visits).map(|i| open[i])
                }
                Kind::Predict(p) => {
                    if !p.expanded {
                        self.expand_predict(cur)?;
                        break;
                    }
                    p.children
                        .iter()
                        .copied()
                        .filter(|&c| !self.nodes[c].complete)
                        .min_by_key(|&c| self.nodes[c].visits)
                }
            };
            match next {
                Some(n) => {
                    path.push(n);
                    cur = n;
                }
                None => break,
            }
        }
        for &n in path.iter().rev() {
            self.nodes[n].visits += 1;
            self.refresh(n);
        }
        Ok(path)
    }

    /// UCB1 over expanded actions with the subjective score as exploitation,
    /// then the less visited of the action's two children.
    fn select_action(&self, n: NodeId) -> Option<NodeId> {
        let d = self.decision(n);
        let parent = self.nodes[n].visits;
        let mut best: Option<(f64, NodeId)> = None;
        for e in &d.entries {
            let sides: Vec<NodeId> = [e.subjective, e.objective]
                .into_iter()
                .flatten()
                .filter(|&s| !self.nodes[s].complete)
                .collect();
            if e.vetoed || sides.is_empty() {
                continue;
            }
            let visits: u32 = [e.subjective, e.objective].into_iter().flatten().map(|s| self.nodes[s].visits).sum();
            let u = ucb1(self.entry_sc(e), self.cfg.exploration, parent, visits);
            if best.is_none_or(|(b, _)| u > b) {
                let side = match (e.subjective, e.objective) {
                    (Some(s), Some(o)) if !self.nodes[s].complete && !self.nodes[o].complete => {
                        if prefer_subjective(self.nodes[s].visits, self.nodes[o].visits) {
                            s
                        } else {
                            o
                        }
                    }
                    _ => sides[0],
                };
                best = Some((u, side));
            }
        }
        best.map(|(_, s)| s)
    }

    /// Recomputes value and completeness of `n` from its children.
    fn refresh(&mut self, n: NodeId) {
        let (value, complete) = match &self.nodes[n].kind {
            Kind::Split(s) => {
                let vals: Vec<f64> = s.children.iter().map(|&c| self.nodes[c].value).collect();
                let complete = s.children.iter().all(|&c| self.nodes[c].complete);
                (backup_split(&vals, s.penalty), complete)
            }
            Kind::Predict(p) => {
                if p.terminal || p.frozen || !p.expanded {
                    return;
                }
                let vals: Vec<DecisionValue> = p.children.iter().map(|&c| self.decision(c).value).collect();
                let complete = p.children.iter().all(|&c| self.nodes[c].complete);
                (backup_predict(&vals), complete)
            }
            Kind::Decision(d) => {
                let scores: Vec<ActionScore> = d
                    .entries
                    .iter()
                    .map(|e| ActionScore {
                        kind: e.action.kind,
                        sc: self.entry_sc(e),
                        oc: self.entry_oc(e, d.root),
                    })
                    .collect();
                let dv = decision_value(&scores);
                let settled = d.entries.iter().all(|e| {
                    e.vetoed
                        || [e.subjective, e.objective]
                            .into_iter()
                            .flatten()
                            .all(|s| self.nodes[s].complete)
                });
                let complete = settled && self.next_expandable(n).is_none();
                let Kind::Decision(d) = &mut self.nodes[n].kind else { unreachable!() };
                d.value = dv;
                (dv.expected, complete)
            }
        };
        self.nodes[n].value = value;
        self.nodes[n].complete = complete;
    }
}

#[cfg(test)]
mod tests;
