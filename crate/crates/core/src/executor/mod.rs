//! An agent's side of a joint execution: track beliefs from observed
//! actions and decide what to do next.

mod candidates;

use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use candidates::{candidate_actions, executed_timepoints, feasible_executions};

use crate::actions::{mk_answer, product_update, truthful_answer, ActionError, ActionKind, Payload, PointedAction};
use crate::doxastic::{AgentId, DoxError, DoxFormula, PointedState};
use crate::kb::CachedSolver;
use crate::mcts::{search, Choice, SearchConfig, SearchContext, SearchError, StopReason, Termination};
use crate::planlib::PlanLibrary;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("observation {got} arrived after {last}")]
    OutOfOrder { got: u64, last: u64 },
    #[error("observed action `{0}` is impossible in every world the agent considers")]
    ObservationContradiction(String),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Dox(#[from] DoxError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Knobs shared by every search a session runs.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub iteration_cap: u32,
    pub time_budget: Option<Duration>,
    pub horizon: u32,
    pub explanation_depth: usize,
    pub prefer_action: bool,
    pub record_trace: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            iteration_cap: 1000,
            time_budget: None,
            horizon: 3,
            explanation_depth: 1,
            prefer_action: false,
            record_trace: false,
        }
    }
}

impl SessionConfig {
    pub fn search_config(&self, t: Termination) -> SearchConfig {
        let mut cfg = SearchConfig::for_subroutine(t);
        cfg.iteration_cap = self.iteration_cap;
        cfg.time_budget = self.time_budget;
        cfg.horizon = self.horizon;
        cfg.explanation_depth = self.explanation_depth;
        cfg.prefer_action = self.prefer_action && t == Termination::SearchAction;
        cfg.record_trace = self.record_trace;
        cfg
    }
}

/// What the last decision was based on.
#[derive(Clone, Debug, Serialize)]
pub struct DecisionReport {
    pub subroutine: Option<Termination>,
    pub iterations: u32,
    pub stop: Option<StopReason>,
    pub trace: Vec<crate::mcts::IterationRecord>,
}

/// Common interface of the epistemic agent and the baseline.
pub trait Agent: Send {
    fn ego(&self) -> AgentId;

    /// Absorbs an observed action. Returns an immediate reply when the
    /// action is a question to this agent.
    fn observe(&mut self, seq: u64, action: &PointedAction) -> Result<Option<PointedAction>, SessionError>;

    /// Picks the agent's next action, `None` to wait.
    fn decide(&mut self) -> Result<Option<PointedAction>, SessionError>;

    /// `observe` followed by `decide` when no reply is due.
    fn on_observe(&mut self, seq: u64, action: &PointedAction) -> Result<Option<PointedAction>, SessionError> {
        match self.observe(seq, action)? {
            Some(reply) => Ok(Some(reply)),
            None => self.decide(),
        }
    }

    /// Whether the agent believes everyone believes the task succeeded.
    fn believes_common_success(&self) -> Result<bool, SessionError>;

    fn state(&self) -> &PointedState;

    fn last_report(&self) -> &DecisionReport;
}

/// The epistemic agent.
pub struct AgentSession {
    ego: AgentId,
    state: PointedState,
    lib: Arc<PlanLibrary>,
    solver: CachedSolver,
    rng: ChaCha8Rng,
    cfg: SessionConfig,
    /// Open question addressed to someone else: (askee, formula).
    pending_question: Option<(AgentId, DoxFormula)>,
    last_seq: Option<u64>,
    report: DecisionReport,
}

/// Seed of agent `ego`'s generator for a run seeded with `seed`.
pub fn agent_seed(seed: u64, ego: AgentId) -> u64 {
    seed ^ (u64::from(ego.0) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl AgentSession {
    /// `state` is what the agent holds possible: the components of the true
    /// world for the agent, or any designation the scenario gives it.
    pub fn new(lib: Arc<PlanLibrary>, state: PointedState, ego: AgentId, cfg: SessionConfig, seed: u64) -> Self {
        AgentSession {
            ego,
            state,
            lib,
            solver: CachedSolver::new(),
            rng: ChaCha8Rng::seed_from_u64(agent_seed(seed, ego)),
            cfg,
            pending_question: None,
            last_seq: None,
            report: DecisionReport {
                subroutine: None,
                iterations: 0,
                stop: None,
                trace: Vec::new(),
            },
        }
    }

    pub fn lib(&self) -> &Arc<PlanLibrary> {
        &self.lib
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn pending_question(&self) -> Option<&(AgentId, DoxFormula)> {
        self.pending_question.as_ref()
    }

    fn check_seq(&mut self, seq: u64) -> Result<(), SessionError> {
        if let Some(last) = self.last_seq {
            if seq <= last {
                return Err(SessionError::OutOfOrder { got: seq, last });
            }
        }
        self.last_seq = Some(seq);
        Ok(())
    }

    fn holds(&self, f: &DoxFormula) -> Result<bool, SessionError> {
        Ok(self.state.satisfies(f, &self.solver)?)
    }

    fn success(&self) -> DoxFormula {
        DoxFormula::Succeeded(self.lib.success_condition().clone())
    }

    /// Which subroutine the agent's beliefs call for, if any.
    pub fn subroutine(&self) -> Result<Option<Termination>, SessionError> {
        let a = self.ego;
        let agents: Vec<AgentId> = self.state.model.agent_ids().collect();
        let failed = DoxFormula::failed();
        let believes = |f: DoxFormula| self.holds(&DoxFormula::belief(a, f));
        if believes(failed.clone())? {
            let shared = believes(DoxFormula::everyone_believes(agents, &failed))?;
            return Ok((!shared).then_some(Termination::ExplainFailure));
        }
        if !believes(DoxFormula::not(failed))? {
            return Ok(Some(Termination::AskIfFailure));
        }
        let success = self.success();
        if believes(success.clone())? {
            let shared = believes(DoxFormula::everyone_believes(agents, &success))?;
            return Ok((!shared).then_some(Termination::ExplainSuccess));
        }
        if self.pending_question.is_some() {
            return Ok(None);
        }
        Ok(Some(Termination::SearchAction))
    }

    fn run(&mut self, t: Termination) -> Result<Option<PointedAction>, SessionError> {
        let cfg = self.cfg.search_config(t);
        let ctx = SearchContext {
            lib: &self.lib,
            solver: &self.solver,
        };
        let out = search(&self.state, self.ego, &cfg, &ctx, &mut self.rng)?;
        self.report = DecisionReport {
            subroutine: Some(t),
            iterations: out.iterations,
            stop: Some(out.stop),
            trace: out.trace,
        };
        Ok(match out.choice {
            Choice::Act(a) => Some(a),
            Choice::Noop | Choice::None => None,
        })
    }
}

impl Agent for AgentSession {
    fn ego(&self) -> AgentId {
        self.ego
    }

    fn observe(&mut self, seq: u64, action: &PointedAction) -> Result<Option<PointedAction>, SessionError> {
        self.check_seq(seq)?;
        match action.kind {
            ActionKind::Noop => Ok(None),
            ActionKind::Ask => {
                let askee = action.askee.expect("questions have an askee");
                let Payload::Formula(f) = &action.payload else {
                    unreachable!("questions carry a formula")
                };
                if askee == self.ego {
                    let answer = truthful_answer(&self.state, self.ego, f, &self.solver)?;
                    return Ok(Some(mk_answer(self.ego, f.clone(), answer)?));
                }
                self.pending_question = Some((askee, f.clone()));
                Ok(None)
            }
            kind => {
                if kind == ActionKind::Answer {
                    self.pending_question = None;
                }
                match product_update(&self.state, action, &self.solver) {
                    Ok(up) => {
                        self.state = up.state;
                        Ok(None)
                    }
                    Err(ActionError::Inapplicable) => {
                        Err(SessionError::ObservationContradiction(action.describe(&self.lib)))
                    }
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    fn decide(&mut self) -> Result<Option<PointedAction>, SessionError> {
        match self.subroutine()? {
            Some(t) => self.run(t),
            None => {
                self.report = DecisionReport {
                    subroutine: None,
                    iterations: 0,
                    stop: None,
                    trace: Vec::new(),
                };
                Ok(None)
            }
        }
    }

    fn believes_common_success(&self) -> Result<bool, SessionError> {
        let agents: Vec<AgentId> = self.state.model.agent_ids().collect();
        self.holds(&DoxFormula::belief(
            self.ego,
            DoxFormula::everyone_believes(agents, &self.success()),
        ))
    }

    fn state(&self) -> &PointedState {
        &self.state
    }

    fn last_report(&self) -> &DecisionReport {
        &self.report
    }
}
