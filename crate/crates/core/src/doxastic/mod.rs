//! Plausibility models whose worlds are knowledge bases, and the conditional
//! belief language evaluated over them.

mod eval;
mod formula;

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use fixedbitset::FixedBitSet;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::kb::{Kb, KbError, Solver};

pub use formula::{DoxFormula, FormulaContext, SuccessCondition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DoxError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("duplicate world id `{0}`")]
    DuplicateWorld(String),
    #[error("worlds disagree on declared variables")]
    SchemaMismatch,
    #[error("relation for agent `{agent}` has size {got}, expected {expected}")]
    RelationSize { agent: String, got: usize, expected: usize },
    #[error("a pointed state needs at least one designated world")]
    EmptyDesignation,
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Index of an agent within a model's agent list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub u16);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Binary relation on `0..n` stored as a dense matrix; `le(w, v)` reads
/// "w is at least as plausible as v".
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Preorder {
    rows: Vec<FixedBitSet>,
}

impl fmt::Debug for Preorder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<(usize, usize)> = self.pairs().collect();
        f.debug_tuple("Preorder").field(&pairs).finish()
    }
}

impl Preorder {
    /// The empty relation.
    pub fn empty(n: usize) -> Self {
        Preorder {
            rows: vec![FixedBitSet::with_capacity(n); n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut p = Preorder::empty(n);
        for w in 0..n {
            p.set(w, w);
        }
        p
    }

    /// Every pair related both ways.
    pub fn total_equi(n: usize) -> Self {
        let mut p = Preorder::empty(n);
        for row in &mut p.rows {
            row.insert_range(..);
        }
        p
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut p = Preorder::empty(n);
        for (w, v) in pairs {
            p.set(w, v);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn set(&mut self, w: usize, v: usize) {
        self.rows[w].insert(v);
    }

    pub fn le(&self, w: usize, v: usize) -> bool {
        self.rows[w].contains(v)
    }

    pub fn strict(&self, w: usize, v: usize) -> bool {
        self.le(w, v) && !self.le(v, w)
    }

    pub fn equi(&self, w: usize, v: usize) -> bool {
        self.le(w, v) && self.le(v, w)
    }

    /// `le(w, v) || le(v, w)`.
    pub fn comparable(&self, w: usize, v: usize) -> bool {
        self.le(w, v) || self.le(v, w)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(w, row)| row.ones().map(move |v| (w, v)))
    }

    /// Reflexive-transitive closure (Warshall on bit rows).
    pub fn closure(&self) -> Preorder {
        let mut p = self.clone();
        let n = p.len();
        for w in 0..n {
            p.rows[w].insert(w);
        }
        for k in 0..n {
            let row_k = p.rows[k].clone();
            for w in 0..n {
                if p.rows[w].contains(k) {
                    p.rows[w].union_with(&row_k);
                }
            }
        }
        p
    }

    /// Restriction to `keep` (in the given order), renumbered from 0.
    pub fn restrict(&self, keep: &[usize]) -> Preorder {
        let mut p = Preorder::empty(keep.len());
        for (i, &w) in keep.iter().enumerate() {
            for (j, &v) in keep.iter().enumerate() {
                if self.le(w, v) {
                    p.set(i, j);
                }
            }
        }
        p
    }

    /// Components of the symmetric-transitive closure of `le ∪ ge`.
    pub(crate) fn components(&self) -> (Vec<usize>, Vec<FixedBitSet>) {
        let n = self.len();
        let mut comp_of = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if comp_of[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = FixedBitSet::with_capacity(n);
            let mut stack = vec![start];
            comp_of[start] = id;
            while let Some(w) = stack.pop() {
                members.insert(w);
                for (v, c) in comp_of.iter_mut().enumerate() {
                    if *c == usize::MAX && self.comparable(w, v) {
                        *c = id;
                        stack.push(v);
                    }
                }
            }
            comps.push(members);
        }
        (comp_of, comps)
    }

    /// `{w ∈ s | no v ∈ s with v < w}`.
    pub fn minimal(&self, s: &FixedBitSet) -> FixedBitSet {
        let mut out = FixedBitSet::with_capacity(self.len());
        for w in s.ones() {
            if !s.ones().any(|v| self.strict(v, w)) {
                out.insert(w);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World {
    pub id: String,
    pub kb: Kb,
}

impl World {
    pub fn new(id: impl Into<String>, kb: Kb) -> Self {
        World { id: id.into(), kb }
    }
}

/// Per-agent structure derived once per model.
struct AgentView {
    comp_of: Vec<usize>,
    comps: Vec<FixedBitSet>,
    comp_min: Vec<FixedBitSet>,
}

struct ModelInner {
    agents: Arc<[String]>,
    worlds: Vec<World>,
    order: Vec<Preorder>,
    views: Vec<AgentView>,
    fingerprint: u64,
    memo: Mutex<FxHashMap<DoxFormula, Arc<FixedBitSet>>>,
}

/// Worlds carrying knowledge bases plus one plausibility relation per agent.
///
/// Cheap to clone. Truth sets of evaluated formulas are memoized on the
/// model; models are immutable so the memo never goes stale.
#[derive(Clone)]
pub struct PlausibilityModel {
    inner: Arc<ModelInner>,
}

impl fmt::Debug for PlausibilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("PlausibilityModel");
        d.field("agents", &self.inner.agents);
        d.field("worlds", &self.inner.worlds);
        for (a, p) in self.inner.agents.iter().zip(&self.inner.order) {
            d.field(a, p);
        }
        d.finish()
    }
}

impl PartialEq for PlausibilityModel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.fingerprint == other.inner.fingerprint
                && self.inner.agents == other.inner.agents
                && self.inner.worlds == other.inner.worlds
                && self.inner.order == other.inner.order)
    }
}

impl Eq for PlausibilityModel {}

impl PlausibilityModel {
    /// Builds a model from raw relations. No closure is applied and no
    /// property is enforced; see [`validate_model`] and [`Preorder::closure`].
    pub fn new(agents: Arc<[String]>, worlds: Vec<World>, order: Vec<Preorder>) -> Result<Self, DoxError> {
        let n = worlds.len();
        let mut seen = BTreeSet::new();
        for w in &worlds {
            if !seen.insert(w.id.as_str()) {
                return Err(DoxError::DuplicateWorld(w.id.clone()));
            }
        }
        if let Some(first) = worlds.first() {
            if worlds.iter().any(|w| w.kb.schema() != first.kb.schema()) {
                return Err(DoxError::SchemaMismatch);
            }
        }
        if order.len() != agents.len() {
            return Err(DoxError::RelationSize {
                agent: "*".into(),
                got: order.len(),
                expected: agents.len(),
            });
        }
        for (a, p) in agents.iter().zip(&order) {
            if p.len() != n {
                return Err(DoxError::RelationSize {
                    agent: a.clone(),
                    got: p.len(),
                    expected: n,
                });
            }
        }
        Ok(Self::build(agents, worlds, order))
    }

    pub(crate) fn build(agents: Arc<[String]>, worlds: Vec<World>, order: Vec<Preorder>) -> Self {
        let views = order
            .iter()
            .map(|p| {
                let (comp_of, comps) = p.components();
                let comp_min = comps.iter().map(|c| p.minimal(c)).collect();
                AgentView {
                    comp_of,
                    comps,
                    comp_min,
                }
            })
            .collect();
        let mut h = std::hash::DefaultHasher::new();
        agents.hash(&mut h);
        for w in &worlds {
            w.id.hash(&mut h);
            w.kb.fingerprint().hash(&mut h);
        }
        order.hash(&mut h);
        PlausibilityModel {
            inner: Arc::new(ModelInner {
                agents,
                worlds,
                order,
                views,
                fingerprint: h.finish(),
                memo: Mutex::new(FxHashMap::default()),
            }),
        }
    }

    pub fn agents(&self) -> &Arc<[String]> {
        &self.inner.agents
    }

    pub fn agent(&self, name: &str) -> Result<AgentId, DoxError> {
        self.inner
            .agents
            .iter()
            .position(|a| a == name)
            .map(|i| AgentId(i as u16))
            .ok_or_else(|| DoxError::UnknownAgent(name.into()))
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.inner.agents.len() as u16).map(AgentId)
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.inner.agents[a.index()]
    }

    pub fn worlds(&self) -> &[World] {
        &self.inner.worlds
    }

    pub fn world(&self, w: usize) -> &World {
        &self.inner.worlds[w]
    }

    pub fn world_index(&self, id: &str) -> Result<usize, DoxError> {
        self.inner
            .worlds
            .iter()
            .position(|w| w.id == id)
            .ok_or_else(|| DoxError::UnknownWorld(id.into()))
    }

    pub fn len(&self) -> usize {
        self.inner.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.worlds.is_empty()
    }

    pub fn order(&self, a: AgentId) -> &Preorder {
        &self.inner.order[a.index()]
    }

    pub fn orders(&self) -> &[Preorder] {
        &self.inner.order
    }

    pub fn fingerprint(&self) -> u64 {
        self.inner.fingerprint
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// `cc_a(w)`: worlds reachable from `w` through `≤_a ∪ ≥_a`.
    pub fn cc(&self, a: AgentId, w: usize) -> &FixedBitSet {
        let view = &self.inner.views[a.index()];
        &view.comps[view.comp_of[w]]
    }

    /// `min_a(cc_a(w))`, precomputed.
    pub fn cc_min(&self, a: AgentId, w: usize) -> &FixedBitSet {
        let view = &self.inner.views[a.index()];
        &view.comp_min[view.comp_of[w]]
    }

    pub fn component_id(&self, a: AgentId, w: usize) -> usize {
        self.inner.views[a.index()].comp_of[w]
    }

    pub fn min_plausible(&self, a: AgentId, s: &FixedBitSet) -> FixedBitSet {
        self.order(a).minimal(s)
    }

    pub fn empty_set(&self) -> FixedBitSet {
        FixedBitSet::with_capacity(self.len())
    }

    pub fn full_set(&self) -> FixedBitSet {
        let mut s = self.empty_set();
        s.insert_range(..);
        s
    }

    /// `[φ]`: the worlds where `φ` holds.
    pub fn truth_set(&self, f: &DoxFormula, solver: &dyn Solver) -> Result<Arc<FixedBitSet>, DoxError> {
        eval::truth_set(self, f, solver)
    }

    pub fn holds_at(&self, w: usize, f: &DoxFormula, solver: &dyn Solver) -> Result<bool, DoxError> {
        Ok(self.truth_set(f, solver)?.contains(w))
    }

    pub(crate) fn memo_get(&self, f: &DoxFormula) -> Option<Arc<FixedBitSet>> {
        self.inner.memo.lock().unwrap().get(f).cloned()
    }

    pub(crate) fn memo_put(&self, f: &DoxFormula, s: Arc<FixedBitSet>) {
        self.inner.memo.lock().unwrap().insert(f.clone(), s);
    }
}

/// A model with designated worlds, kept sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointedState {
    pub model: PlausibilityModel,
    designated: Vec<usize>,
}

impl Hash for PointedState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.model.fingerprint().hash(state);
        self.designated.hash(state);
    }
}

impl PointedState {
    pub fn new(model: PlausibilityModel, designated: impl IntoIterator<Item = usize>) -> Result<Self, DoxError> {
        let set: BTreeSet<usize> = designated.into_iter().collect();
        if set.is_empty() {
            return Err(DoxError::EmptyDesignation);
        }
        if let Some(&w) = set.iter().find(|&&w| w >= model.len()) {
            return Err(DoxError::UnknownWorld(format!("#{w}")));
        }
        Ok(PointedState {
            model,
            designated: set.into_iter().collect(),
        })
    }

    pub(crate) fn from_set(model: PlausibilityModel, s: &FixedBitSet) -> Self {
        let designated: Vec<usize> = s.ones().collect();
        debug_assert!(!designated.is_empty());
        PointedState { model, designated }
    }

    pub fn designated(&self) -> &[usize] {
        &self.designated
    }

    pub fn designated_set(&self) -> FixedBitSet {
        let mut s = self.model.empty_set();
        for &w in &self.designated {
            s.insert(w);
        }
        s
    }

    pub fn is_global(&self) -> bool {
        self.designated.len() == 1
    }

    pub fn satisfies(&self, f: &DoxFormula, solver: &dyn Solver) -> Result<bool, DoxError> {
        let set = self.model.truth_set(f, solver)?;
        Ok(self.designated.iter().all(|&w| set.contains(w)))
    }

    /// Hash of the model and the designation; stable across runs.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::hash::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    /// Designated = `min_a(⋃ cc_a(w))` over the current designation.
    pub fn local_perspective(&self, a: AgentId) -> PointedState {
        let mut union = self.model.empty_set();
        for &w in &self.designated {
            union.union_with(self.model.cc(a, w));
        }
        PointedState::from_set(self.model.clone(), &self.model.min_plausible(a, &union))
    }

    /// Designated = `min_a(W_d)`.
    pub fn most_plausible(&self, a: AgentId) -> PointedState {
        PointedState::from_set(self.model.clone(), &self.model.min_plausible(a, &self.designated_set()))
    }

    /// Designated = `⋃ cc_a(w)` over the current designation.
    pub fn components_of(&self, a: AgentId) -> PointedState {
        let mut union = self.model.empty_set();
        for &w in &self.designated {
            union.union_with(self.model.cc(a, w));
        }
        PointedState::from_set(self.model.clone(), &union)
    }

    /// One global state per designated world, in world order.
    pub fn split_globals(&self) -> Vec<PointedState> {
        self.designated
            .iter()
            .map(|&w| PointedState {
                model: self.model.clone(),
                designated: vec![w],
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    Reflexive,
    Transitive,
    LocallyConnected,
    WellFounded,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Reflexive => "reflexivity",
            Property::Transitive => "transitivity",
            Property::LocallyConnected => "local connectedness",
            Property::WellFounded => "well-foundedness",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub property: Property,
    pub agent: String,
    pub worlds: Vec<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated for `{}` at [{}]", self.property, self.agent, self.worlds.join(", "))
    }
}

/// Every failure of reflexivity, transitivity, local connectedness and
/// well-foundedness, one witness per failure.
pub fn validate_model(model: &PlausibilityModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = model.len();
    let name = |w: usize| model.world(w).id.clone();
    for a in model.agent_ids() {
        let p = model.order(a);
        let agent = model.agent_name(a).to_string();
        let mut push = |property, ws: &[usize]| {
            out.push(Violation {
                property,
                agent: agent.clone(),
                worlds: ws.iter().map(|&w| name(w)).collect(),
            })
        };
        for w in 0..n {
            if !p.le(w, w) {
                push(Property::Reflexive, &[w]);
            }
        }
        for w in 0..n {
            for v in p.rows[w].ones() {
                for u in p.rows[v].ones() {
                    if !p.le(w, u) {
                        push(Property::Transitive, &[w, v, u]);
                    }
                }
            }
        }
        for w in 0..n {
            for v in model.cc(a, w).ones().filter(|&v| v > w) {
                if !p.comparable(w, v) {
                    push(Property::LocallyConnected, &[w, v]);
                }
            }
        }
        if let Some(cycle) = strict_cycle(p) {
            push(Property::WellFounded, &cycle);
        }
    }
    out
}

/// A cycle of the strict part, if any.
fn strict_cycle(p: &Preorder) -> Option<Vec<usize>> {
    let n = p.len();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; n];
    let mut path = Vec::new();
    fn dfs(p: &Preorder, w: usize, mark: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<usize>> {
        mark[w] = 1;
        path.push(w);
        for v in 0..p.len() {
            if !p.strict(v, w) {
                continue;
            }
            if mark[v] == 1 {
                let start = path.iter().position(|&x| x == v).unwrap();
                return Some(path[start..].to_vec());
            }
            if mark[v] == 0 {
                if let Some(c) = dfs(p, v, mark, path) {
                    return Some(c);
                }
            }
        }
        path.pop();
        mark[w] = 2;
        None
    }
    for w in 0..n {
        if mark[w] == 0 {
            if let Some(c) = dfs(p, w, &mut mark, &mut path) {
                return Some(c);
            }
        }
    }
    None
}
