//! What an agent may do next, judged from its own perspective.

use std::collections::BTreeSet;

use crate::actions::{mk_execution_action, mk_explanation, mk_intent_announcement, mk_noop, mk_question, ActionKind, PointedAction};
use crate::doxastic::{AgentId, DoxError, DoxFormula, PointedState};
use crate::kb::{Constraint, Kb, Solver};
use crate::mcts::KindSet;
use crate::planlib::PlanLibrary;

/// Time points entailed executed in `kb`.
pub fn executed_timepoints(lib: &PlanLibrary, kb: &Kb, solver: &dyn Solver) -> BTreeSet<usize> {
    (0..lib.timepoints().len())
        .filter(|&tp| !solver.satisfiable(kb, Some(&Constraint::not(lib.executed(tp)))))
        .collect()
}

/// Own time points the agent can execute without making any designated
/// world of `view` inconsistent. `view` is the agent's perspective, so this
/// also implies `B_agent sat(e=T)`.
pub fn feasible_executions(view: &PointedState, agent: AgentId, lib: &PlanLibrary, solver: &dyn Solver) -> Vec<usize> {
    let worlds: Vec<(&Kb, BTreeSet<usize>)> = view
        .designated()
        .iter()
        .map(|&w| {
            let kb = &view.model.world(w).kb;
            (kb, executed_timepoints(lib, kb, solver))
        })
        .collect();
    (0..lib.timepoints().len())
        .filter(|&tp| lib.timepoints()[tp].owner == agent)
        .filter(|&tp| {
            worlds.iter().all(|(kb, done)| {
                !done.contains(&tp) && solver.satisfiable(kb, Some(&lib.execution_effect(tp, |p| !done.contains(&p))))
            })
        })
        .collect()
}

/// Candidate actions in a fixed order: executions, noop, intents,
/// explanations, questions.
///
/// Explanations and questions draw on the literals `in(c)` and `¬in(c)` for
/// constraints `c` found in some world of the agent's components but not in
/// every world of the model, plus those literals under one belief operator
/// of another agent when `depth ≥ 1`. An explanation needs `B_agent φ` and
/// that some other agent might not believe `φ` yet; a question needs the
/// agent to be unsure of `φ`.
pub fn candidate_actions(
    view: &PointedState,
    agent: AgentId,
    kinds: KindSet,
    lib: &PlanLibrary,
    solver: &dyn Solver,
    depth: usize,
) -> Result<Vec<PointedAction>, DoxError> {
    let mut out = Vec::new();
    if kinds.contains(ActionKind::Execute) {
        out.extend(feasible_executions(view, agent, lib, solver).into_iter().map(|tp| mk_execution_action(lib, tp)));
    }
    if kinds.contains(ActionKind::Noop) {
        out.push(mk_noop(agent));
    }
    if kinds.contains(ActionKind::Intent) {
        let schema = lib.schema();
        for v in lib.decision_vars() {
            for d in 0..schema.domain_size(v) {
                let c = Constraint::Assign(v, d);
                let possible = DoxFormula::belief(agent, DoxFormula::sat(c.clone()));
                let settled = DoxFormula::belief(agent, DoxFormula::entailed(c.clone()));
                if view.satisfies(&possible, solver)? && !view.satisfies(&settled, solver)? {
                    out.push(mk_intent_announcement(agent, c));
                }
            }
        }
    }
    let explain = kinds.contains(ActionKind::Explain);
    let ask = kinds.contains(ActionKind::Ask);
    if !explain && !ask {
        return Ok(out);
    }
    let m = &view.model;
    let others: Vec<AgentId> = m.agent_ids().filter(|&b| b != agent).collect();
    let pool = literal_pool(view, agent);
    let mut positives: Vec<DoxFormula> = pool.iter().map(|c| DoxFormula::member(c.clone())).collect();
    let mut literals: Vec<DoxFormula> = Vec::new();
    for p in &positives {
        literals.push(p.clone());
        literals.push(DoxFormula::not(p.clone()));
    }
    if depth >= 1 {
        let nested: Vec<DoxFormula> = others
            .iter()
            .flat_map(|&b| literals.iter().map(move |l| DoxFormula::belief(b, l.clone())))
            .collect();
        let nested_pos: Vec<(AgentId, DoxFormula)> = others
            .iter()
            .flat_map(|&b| positives.iter().map(move |p| (b, DoxFormula::belief(b, p.clone()))))
            .collect();
        literals.extend(nested);
        positives.extend(nested_pos.into_iter().map(|(_, f)| f));
    }
    if explain {
        for phi in &literals {
            let believed = DoxFormula::belief(agent, phi.clone());
            let shared = DoxFormula::belief(agent, DoxFormula::everyone_believes(others.iter().copied(), phi));
            if view.satisfies(&believed, solver)? && !view.satisfies(&shared, solver)? {
                out.push(mk_explanation(agent, phi.clone()).expect("literals are explainable"));
            }
        }
    }
    if ask {
        for &askee in &others {
            for phi in &positives {
                if let DoxFormula::CondBelief(b, ..) = phi {
                    // Asking the askee about its own beliefs is the plain question.
                    if *b == askee {
                        continue;
                    }
                }
                let yes = DoxFormula::belief(agent, phi.clone());
                let no = DoxFormula::belief(agent, DoxFormula::not(phi.clone()));
                if !view.satisfies(&yes, solver)? && !view.satisfies(&no, solver)? {
                    out.push(mk_question(agent, askee, phi.clone()).expect("literals are explainable"));
                }
            }
        }
    }
    Ok(out)
}

fn literal_pool(view: &PointedState, agent: AgentId) -> BTreeSet<Constraint> {
    let m = &view.model;
    let mut reach = m.empty_set();
    for &w in view.designated() {
        reach.union_with(m.cc(agent, w));
    }
    let everywhere = |c: &Constraint| m.worlds().iter().all(|w| w.kb.contains(c));
    let mut pool = BTreeSet::new();
    for w in reach.ones() {
        for c in m.world(w).kb.constraints() {
            if !pool.contains(c) && !everywhere(c) {
                pool.insert(c.clone());
            }
        }
    }
    pool
}
