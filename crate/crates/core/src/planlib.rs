//! Multi-agent temporal plan libraries and their knowledge-base encoding.
//!
//! The encoding has one variable per decision variable plus a boolean per
//! time point (named after the time point, `T` meaning executed). A compiled
//! knowledge base is consistent exactly when some subplan is still feasible
//! for the execution so far.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doxastic::{AgentId, DoxError, PlausibilityModel, PointedState, SuccessCondition, World};
use crate::kb::{advance, Constraint, Kb, KbError, Schema, Solver, VarDecl, VarId, TRUE_VALUE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("unknown time point `{0}`")]
    UnknownTimePoint(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("duplicate identifier `{0}`")]
    Duplicate(String),
    #[error("guard of `{0}` is not a conjunction of decision-variable assignments")]
    BadGuard(String),
    #[error("ordering {pred} -> {succ}: {reason}")]
    BadOrdering { pred: String, succ: String, reason: String },
    #[error("world `{0}` constrains time-point variables; initial beliefs may only differ on decision variables")]
    TimePointInWorld(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Dox(#[from] DoxError),
}

/// Text-level description of a library, as found in scenario files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibrarySpec {
    pub agents: Vec<String>,
    pub variables: Vec<VariableSpec>,
    pub timepoints: Vec<TimePointSpec>,
    #[serde(default)]
    pub orderings: Vec<OrderingSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub domain: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimePointSpec {
    pub id: String,
    pub owner: String,
    #[serde(default = "true_text")]
    pub guard: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingSpec {
    pub pred: String,
    pub succ: String,
    #[serde(default = "true_text")]
    pub guard: String,
}

fn true_text() -> String {
    "true".into()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimePoint {
    pub id: String,
    pub owner: AgentId,
    pub guard: Constraint,
    pub var: VarId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ordering {
    pub pred: usize,
    pub succ: usize,
    pub guard: Constraint,
}

/// A validated library together with its encoding schema and the constraints
/// every compiled knowledge base starts from.
#[derive(Clone, Debug)]
pub struct PlanLibrary {
    agents: Arc<[String]>,
    schema: Arc<Schema>,
    num_decision: usize,
    timepoints: Vec<TimePoint>,
    orderings: Vec<Ordering>,
    /// Distinct predecessors of each time point, each with the guards of its
    /// orderings into that time point.
    preds: Vec<Vec<(usize, Vec<Constraint>)>>,
    nogoods: Vec<Vec<(VarId, u16)>>,
    base: Vec<Constraint>,
    success: Arc<SuccessCondition>,
}

impl PlanLibrary {
    pub fn from_spec(spec: &LibrarySpec) -> Result<Self, PlanError> {
        let agents: Arc<[String]> = spec.agents.iter().cloned().collect();
        let mut seen = BTreeSet::new();
        for a in agents.iter() {
            if !seen.insert(a.clone()) {
                return Err(PlanError::Duplicate(a.clone()));
            }
        }
        let mut schema = Schema::default();
        for v in &spec.variables {
            schema.push(VarDecl::new(v.name.clone(), v.domain.clone()))?;
        }
        let num_decision = schema.len();
        let mut tp_vars = Vec::new();
        for tp in &spec.timepoints {
            let var = schema
                .push(VarDecl::boolean(tp.id.clone()))
                .map_err(|_| PlanError::Duplicate(tp.id.clone()))?;
            tp_vars.push(var);
        }
        let schema = Arc::new(schema);
        let mut timepoints = Vec::new();
        for (tp, var) in spec.timepoints.iter().zip(tp_vars) {
            let owner = agents
                .iter()
                .position(|a| *a == tp.owner)
                .ok_or_else(|| PlanError::UnknownAgent(tp.owner.clone()))?;
            let guard = schema.parse(&tp.guard)?;
            if !is_decision_conjunction(&guard, num_decision) {
                return Err(PlanError::BadGuard(tp.id.clone()));
            }
            timepoints.push(TimePoint {
                id: tp.id.clone(),
                owner: AgentId(owner as u16),
                guard,
                var,
            });
        }
        let find = |id: &str| {
            timepoints
                .iter()
                .position(|t| t.id == id)
                .ok_or_else(|| PlanError::UnknownTimePoint(id.to_string()))
        };
        let empty = Kb::new(schema.clone());
        let mut orderings = Vec::new();
        for o in &spec.orderings {
            let (pred, succ) = (find(&o.pred)?, find(&o.succ)?);
            let bad = |reason: &str| PlanError::BadOrdering {
                pred: o.pred.clone(),
                succ: o.succ.clone(),
                reason: reason.into(),
            };
            if pred == succ {
                return Err(bad("predecessor and successor coincide"));
            }
            let guard = schema.parse(&o.guard)?;
            if !is_decision_conjunction(&guard, num_decision) {
                return Err(bad("guard is not a conjunction of decision-variable assignments"));
            }
            let both = Constraint::and([timepoints[pred].guard.clone(), timepoints[succ].guard.clone()]);
            let with_guard = empty.add(guard.clone())?;
            if !with_guard.entails(&both)? {
                return Err(bad("guard does not entail the guards of both endpoints"));
            }
            orderings.push(Ordering { pred, succ, guard });
        }
        Ok(Self::assemble(agents, schema, num_decision, timepoints, orderings))
    }

    fn assemble(
        agents: Arc<[String]>,
        schema: Arc<Schema>,
        num_decision: usize,
        timepoints: Vec<TimePoint>,
        orderings: Vec<Ordering>,
    ) -> Self {
        let mut preds: Vec<BTreeMap<usize, Vec<Constraint>>> = vec![BTreeMap::new(); timepoints.len()];
        for o in &orderings {
            preds[o.succ].entry(o.pred).or_default().push(o.guard.clone());
        }
        let preds = preds.into_iter().map(|m| m.into_iter().collect()).collect();
        let nogoods = compute_nogoods(&schema, timepoints.len(), &orderings);
        let mut base = Vec::new();
        for tp in &timepoints {
            base.push(Constraint::implies(Constraint::Assign(tp.var, TRUE_VALUE), tp.guard.clone()));
        }
        for ng in &nogoods {
            base.push(Constraint::not(Constraint::And(
                ng.iter().map(|&(v, x)| Constraint::Assign(v, x)).collect(),
            )));
        }
        let success = Arc::new(SuccessCondition {
            timepoints: timepoints.iter().map(|t| (t.var, t.guard.clone())).collect(),
        });
        PlanLibrary {
            agents,
            schema,
            num_decision,
            timepoints,
            orderings,
            preds,
            nogoods,
            base,
            success,
        }
    }

    pub fn agents(&self) -> &Arc<[String]> {
        &self.agents
    }

    pub fn agent(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|a| a == name).map(|i| AgentId(i as u16))
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn decision_vars(&self) -> impl Iterator<Item = VarId> {
        (0..self.num_decision as u32).map(VarId)
    }

    pub fn is_decision_var(&self, v: VarId) -> bool {
        v.index() < self.num_decision
    }

    pub fn timepoints(&self) -> &[TimePoint] {
        &self.timepoints
    }

    pub fn timepoint(&self, id: &str) -> Result<usize, PlanError> {
        self.timepoints
            .iter()
            .position(|t| t.id == id)
            .ok_or_else(|| PlanError::UnknownTimePoint(id.to_string()))
    }

    pub fn orderings(&self) -> &[Ordering] {
        &self.orderings
    }

    /// Distinct potential predecessors of `tp`, with the guards of the
    /// orderings they head.
    pub fn predecessors(&self, tp: usize) -> &[(usize, Vec<Constraint>)] {
        &self.preds[tp]
    }

    pub fn nogoods(&self) -> &[Vec<(VarId, u16)>] {
        &self.nogoods
    }

    pub fn success_condition(&self) -> &Arc<SuccessCondition> {
        &self.success
    }

    /// `e = T`.
    pub fn executed(&self, tp: usize) -> Constraint {
        Constraint::Assign(self.timepoints[tp].var, TRUE_VALUE)
    }

    /// The constraint an execution of `tp` adds when `unexecuted` lists the
    /// predecessors that have not run yet.
    pub fn execution_effect(&self, tp: usize, unexecuted: impl Fn(usize) -> bool) -> Constraint {
        let mut parts = vec![self.executed(tp)];
        for (pred, guards) in &self.preds[tp] {
            if unexecuted(*pred) {
                parts.extend(guards.iter().map(|g| Constraint::not(g.clone())));
            }
        }
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Constraint::And(parts)
        }
    }

    pub fn compile_initial_kb(&self, extra: impl IntoIterator<Item = Constraint>) -> Result<Kb, PlanError> {
        let mut cs: Vec<Constraint> = Vec::new();
        for c in extra {
            let mut vars = BTreeSet::new();
            c.collect_vars(&mut vars);
            if vars.iter().any(|v| !self.is_decision_var(*v)) {
                return Err(PlanError::TimePointInWorld(self.schema.render(&c)));
            }
            cs.push(c);
        }
        cs.extend(self.base.iter().cloned());
        Ok(Kb::with_constraints(self.schema.clone(), cs)?)
    }

    /// Replaces every world's knowledge base by its compiled form; the
    /// plausibility relations are kept as they are.
    pub fn compile_initial_state(&self, s0: &PointedState) -> Result<PointedState, PlanError> {
        let mut worlds = Vec::with_capacity(s0.model.len());
        for w in s0.model.worlds() {
            let kb = self
                .compile_initial_kb(w.kb.constraints().iter().cloned())
                .map_err(|e| match e {
                    PlanError::TimePointInWorld(_) => PlanError::TimePointInWorld(w.id.clone()),
                    e => e,
                })?;
            worlds.push(World::new(w.id.clone(), kb));
        }
        let model = PlausibilityModel::new(s0.model.agents().clone(), worlds, s0.model.orders().to_vec())?;
        Ok(PointedState::new(model, s0.designated().iter().copied())?)
    }

    pub fn record_execution(&self, kb: &Kb, tp: usize, executed: &BTreeSet<usize>) -> Result<Kb, PlanError> {
        if tp >= self.timepoints.len() {
            return Err(PlanError::UnknownTimePoint(format!("#{tp}")));
        }
        Ok(kb.add(self.execution_effect(tp, |p| !executed.contains(&p)))?)
    }

    pub fn success_holds(&self, kb: &Kb, solver: &dyn Solver) -> bool {
        self.success.holds(kb, solver).unwrap_or(false)
    }

    /// Full decision-variable assignments consistent with `kb`.
    pub fn feasible_subplans(&self, kb: &Kb) -> BTreeSet<Vec<u16>> {
        let vars: Vec<VarId> = self.decision_vars().collect();
        kb.enumerate_models(&vars)
    }

    /// `var=value` text of a subplan, one entry per decision variable.
    pub fn render_subplan(&self, g: &[u16]) -> Vec<String> {
        self.decision_vars()
            .zip(g)
            .map(|(v, &x)| self.schema.render(&Constraint::Assign(v, x)))
            .collect()
    }

    /// The library back in text form.
    pub fn to_spec(&self) -> LibrarySpec {
        let decls = self.schema.decls();
        LibrarySpec {
            agents: self.agents.to_vec(),
            variables: decls[..self.num_decision]
                .iter()
                .map(|d| VariableSpec {
                    name: d.name.clone(),
                    domain: d.domain.clone(),
                })
                .collect(),
            timepoints: self
                .timepoints
                .iter()
                .map(|t| TimePointSpec {
                    id: t.id.clone(),
                    owner: self.agents[t.owner.index()].clone(),
                    guard: self.schema.render(&t.guard),
                })
                .collect(),
            orderings: self
                .orderings
                .iter()
                .map(|o| OrderingSpec {
                    pred: self.timepoints[o.pred].id.clone(),
                    succ: self.timepoints[o.succ].id.clone(),
                    guard: self.schema.render(&o.guard),
                })
                .collect(),
        }
    }
}

fn is_decision_conjunction(c: &Constraint, num_decision: usize) -> bool {
    c.as_conjunction()
        .is_some_and(|asg| asg.iter().all(|(v, _)| v.index() < num_decision))
}

/// Whether the orderings `active` (indices) leave a cycle among time points.
pub(crate) fn has_cycle(n: usize, orderings: &[Ordering], active: impl Iterator<Item = usize>) -> bool {
    let mut adj = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for i in active {
        let o = &orderings[i];
        adj[o.pred].push(o.succ);
        indeg[o.succ] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &s in &adj[v] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                queue.push(s);
            }
        }
    }
    seen < n
}

fn active_under(orderings: &[Ordering], candidates: &[usize], partial: &[u16]) -> Vec<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&i| {
            orderings[i]
                .guard
                .as_conjunction()
                .unwrap()
                .iter()
                .all(|&(v, x)| partial[v.index()] == x)
        })
        .collect()
}

/// Minimal partial assignments whose activated orderings contain a cycle.
///
/// Only orderings inside a strongly connected component of the unguarded
/// precedence graph can take part in a cycle, so enumeration ranges over the
/// variables their guards mention.
fn compute_nogoods(schema: &Schema, n: usize, orderings: &[Ordering]) -> Vec<Vec<(VarId, u16)>> {
    let cyclic: Vec<usize> = (0..orderings.len())
        .filter(|&i| {
            let o = &orderings[i];
            reaches(n, orderings, o.succ, o.pred)
        })
        .collect();
    if cyclic.is_empty() {
        return Vec::new();
    }
    let mut vars = BTreeSet::new();
    for &i in &cyclic {
        orderings[i].guard.collect_vars(&mut vars);
    }
    let vars: Vec<VarId> = vars.into_iter().collect();
    let sizes: Vec<u16> = vars.iter().map(|v| schema.domain_size(*v)).collect();
    let mut digits = vec![0u16; vars.len()];
    let mut found: FxHashSet<Vec<(VarId, u16)>> = FxHashSet::default();
    let mut partial = vec![crate::kb::UNSET; schema.len()];
    loop {
        for (v, &x) in vars.iter().zip(&digits) {
            partial[v.index()] = x;
        }
        if has_cycle(n, orderings, active_under(orderings, &cyclic, &partial).into_iter()) {
            let mut trial = partial.clone();
            for v in &vars {
                let keep = trial[v.index()];
                trial[v.index()] = crate::kb::UNSET;
                if !has_cycle(n, orderings, active_under(orderings, &cyclic, &trial).into_iter()) {
                    trial[v.index()] = keep;
                }
            }
            let ng: Vec<(VarId, u16)> = vars
                .iter()
                .filter(|v| trial[v.index()] != crate::kb::UNSET)
                .map(|v| (*v, trial[v.index()]))
                .collect();
            found.insert(ng);
        }
        if !advance(&mut digits, &sizes) {
            break;
        }
    }
    let mut all: Vec<Vec<(VarId, u16)>> = found.into_iter().collect();
    all.sort();
    let subsumed = |a: &Vec<(VarId, u16)>, b: &Vec<(VarId, u16)>| a != b && a.iter().all(|x| b.contains(x));
    let keep: Vec<Vec<(VarId, u16)>> = all
        .iter()
        .filter(|b| !all.iter().any(|a| subsumed(a, b)))
        .cloned()
        .collect();
    keep
}

fn reaches(n: usize, orderings: &[Ordering], from: usize, to: usize) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(orderings.iter().filter(|o| o.pred == v).map(|o| o.succ));
    }
    false
}
