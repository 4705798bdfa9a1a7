//! The belief-free baseline: one knowledge base, assumed common knowledge.
//!
//! The agent keeps its single most plausible world, plans over executions and
//! waiting only, and gives up once an observation contradicts that world.
//! Explanations and questions from others carry nothing it can represent, so
//! it ignores them, but it still answers questions truthfully.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actions::{mk_answer, product_update, truthful_answer, ActionError, ActionKind, Payload, PointedAction};
use crate::doxastic::{AgentId, DoxFormula, PlausibilityModel, PointedState, Preorder};
use crate::executor::{agent_seed, Agent, DecisionReport, SessionConfig, SessionError};
use crate::kb::CachedSolver;
use crate::mcts::{search, Choice, SearchContext, Termination};
use crate::planlib::PlanLibrary;

pub struct PikeSession {
    ego: AgentId,
    state: PointedState,
    lib: Arc<PlanLibrary>,
    solver: CachedSolver,
    rng: ChaCha8Rng,
    cfg: SessionConfig,
    failed_by_surprise: bool,
    last_seq: Option<u64>,
    report: DecisionReport,
}

/// One-world model holding the knowledge base of the first world `ego`
/// finds most plausible in `state`.
pub fn collapse(state: &PointedState, ego: AgentId) -> PointedState {
    let best = state.most_plausible(ego).designated()[0];
    let m = &state.model;
    let world = m.world(best).clone();
    let orders = m.agent_ids().map(|_| Preorder::identity(1)).collect();
    let model = PlausibilityModel::new(m.agents().clone(), vec![world], orders).expect("a single reflexive world is valid");
    PointedState::new(model, [0]).expect("world 0 exists")
}

impl PikeSession {
    pub fn new(lib: Arc<PlanLibrary>, state: &PointedState, ego: AgentId, cfg: SessionConfig, seed: u64) -> Self {
        PikeSession {
            ego,
            state: collapse(state, ego),
            lib,
            solver: CachedSolver::new(),
            rng: ChaCha8Rng::seed_from_u64(agent_seed(seed, ego)),
            cfg,
            failed_by_surprise: false,
            last_seq: None,
            report: DecisionReport {
                subroutine: None,
                iterations: 0,
                stop: None,
                trace: Vec::new(),
            },
        }
    }

    pub fn failed_by_surprise(&self) -> bool {
        self.failed_by_surprise
    }

    fn holds(&self, f: &DoxFormula) -> Result<bool, SessionError> {
        Ok(self.state.satisfies(f, &self.solver)?)
    }
}

impl Agent for PikeSession {
    fn ego(&self) -> AgentId {
        self.ego
    }

    fn observe(&mut self, seq: u64, action: &PointedAction) -> Result<Option<PointedAction>, SessionError> {
        if let Some(last) = self.last_seq {
            if seq <= last {
                return Err(SessionError::OutOfOrder { got: seq, last });
            }
        }
        self.last_seq = Some(seq);
        if self.failed_by_surprise {
            return Ok(None);
        }
        match action.kind {
            ActionKind::Ask if action.askee == Some(self.ego) => {
                let Payload::Formula(f) = &action.payload else {
                    unreachable!("questions carry a formula")
                };
                let answer = truthful_answer(&self.state, self.ego, f, &self.solver)?;
                Ok(Some(mk_answer(self.ego, f.clone(), answer)?))
            }
            ActionKind::Execute | ActionKind::Intent => match product_update(&self.state, action, &self.solver) {
                Ok(up) => {
                    self.state = up.state;
                    Ok(None)
                }
                Err(ActionError::Inapplicable) => {
                    self.failed_by_surprise = true;
                    Ok(None)
                }
                Err(e) => Err(e.into()),
            },
            _ => Ok(None),
        }
    }

    fn decide(&mut self) -> Result<Option<PointedAction>, SessionError> {
        self.report = DecisionReport {
            subroutine: None,
            iterations: 0,
            stop: None,
            trace: Vec::new(),
        };
        if self.failed_by_surprise
            || self.holds(&DoxFormula::failed())?
            || self.holds(&DoxFormula::Succeeded(self.lib.success_condition().clone()))?
        {
            return Ok(None);
        }
        let cfg = self.cfg.search_config(Termination::SearchAction).without_communication();
        let ctx = SearchContext {
            lib: &self.lib,
            solver: &self.solver,
        };
        let out = search(&self.state, self.ego, &cfg, &ctx, &mut self.rng)?;
        self.report = DecisionReport {
            subroutine: Some(Termination::SearchAction),
            iterations: out.iterations,
            stop: Some(out.stop),
            trace: out.trace,
        };
        Ok(match out.choice {
            Choice::Act(a) => Some(a),
            Choice::Noop | Choice::None => None,
        })
    }

    fn believes_common_success(&self) -> Result<bool, SessionError> {
        if self.failed_by_surprise {
            return Ok(false);
        }
        self.holds(&DoxFormula::Succeeded(self.lib.success_condition().clone()))
    }

    fn state(&self) -> &PointedState {
        &self.state
    }

    fn last_report(&self) -> &DecisionReport {
        &self.report
    }
}
