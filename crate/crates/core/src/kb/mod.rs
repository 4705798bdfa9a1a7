//! Finite-domain constraints and the knowledge bases that carry them.
//!
//! A [`Kb`] is an immutable set of [`Constraint`]s over a shared [`Schema`].
//! Membership is syntactic; entailment and satisfiability are answered by a
//! [`Solver`].

mod solver;
pub(crate) mod syntax;

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rustc_hash::FxHashMap;
use thiserror::Error;

pub use solver::{Backtracking, CachedSolver, Enumerator, Session, Solver};
pub use syntax::ParseError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KbError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{var}` has an empty or repeated domain")]
    BadDomain { var: String },
    #[error("malformed constraint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Index of a variable within its [`Schema`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub domain: Vec<String>,
}

impl VarDecl {
    pub fn new<S: Into<String>>(name: S, domain: impl IntoIterator<Item = impl Into<String>>) -> Self {
        VarDecl {
            name: name.into(),
            domain: domain.into_iter().map(Into::into).collect(),
        }
    }

    /// Boolean variable with domain `{T, F}`; `T` has value index 0.
    pub fn boolean<S: Into<String>>(name: S) -> Self {
        VarDecl::new(name, ["T", "F"])
    }

    pub fn is_boolean(&self) -> bool {
        self.domain.len() == 2 && self.domain[0] == "T" && self.domain[1] == "F"
    }
}

/// Value index of `T` in a boolean domain.
pub const TRUE_VALUE: u16 = 0;

/// Declared variables of one problem.
#[derive(Clone, Debug, Default)]
pub struct Schema {
    vars: Vec<VarDecl>,
    index: FxHashMap<String, VarId>,
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
    }
}

impl Eq for Schema {}

impl Schema {
    pub fn new(decls: impl IntoIterator<Item = VarDecl>) -> Result<Self, KbError> {
        let mut schema = Schema::default();
        for decl in decls {
            schema.push(decl)?;
        }
        Ok(schema)
    }

    pub fn push(&mut self, decl: VarDecl) -> Result<VarId, KbError> {
        if self.index.contains_key(&decl.name) {
            return Err(KbError::DuplicateVariable(decl.name));
        }
        let distinct: BTreeSet<&String> = decl.domain.iter().collect();
        if decl.domain.is_empty() || distinct.len() != decl.domain.len() {
            return Err(KbError::BadDomain { var: decl.name });
        }
        let id = VarId(self.vars.len() as u32);
        self.index.insert(decl.name.clone(), id);
        self.vars.push(decl);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn decl(&self, id: VarId) -> &VarDecl {
        &self.vars[id.index()]
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len() as u32).map(VarId)
    }

    pub fn domain_size(&self, id: VarId) -> u16 {
        self.vars[id.index()].domain.len() as u16
    }

    pub fn value_index(&self, id: VarId, value: &str) -> Option<u16> {
        self.vars
            .get(id.index())?
            .domain
            .iter()
            .position(|d| d == value)
            .map(|i| i as u16)
    }

    /// `var=value` by name.
    pub fn assign(&self, var: &str, value: &str) -> Result<Constraint, KbError> {
        let id = self
            .var(var)
            .ok_or_else(|| KbError::Malformed(format!("undeclared variable `{var}`")))?;
        let val = self
            .value_index(id, value)
            .ok_or_else(|| KbError::Malformed(format!("`{value}` is not in the domain of `{var}`")))?;
        Ok(Constraint::Assign(id, val))
    }

    pub fn parse(&self, text: &str) -> Result<Constraint, KbError> {
        Ok(syntax::parse_constraint(self, text)?)
    }

    pub fn render(&self, c: &Constraint) -> String {
        syntax::render_constraint(self, c)
    }

    pub fn check(&self, c: &Constraint) -> Result<(), KbError> {
        match c {
            Constraint::Top | Constraint::Bottom => Ok(()),
            Constraint::Assign(v, val) => {
                if v.index() >= self.vars.len() {
                    Err(KbError::Malformed(format!("undeclared variable #{}", v.0)))
                } else if *val >= self.domain_size(*v) {
                    Err(KbError::Malformed(format!(
                        "value #{val} outside the domain of `{}`",
                        self.decl(*v).name
                    )))
                } else {
                    Ok(())
                }
            }
            Constraint::Not(inner) => self.check(inner),
            Constraint::And(cs) | Constraint::Or(cs) => cs.iter().try_for_each(|c| self.check(c)),
        }
    }
}

/// Kleene truth value under a partial assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

/// Marker for an unassigned variable in a partial assignment.
pub const UNSET: u16 = u16::MAX;

/// Propositional formula over finite-domain assignments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    Top,
    Bottom,
    Assign(VarId, u16),
    Not(Box<Constraint>),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
}

impl Constraint {
    #[allow(clippy::should_implement_trait)]
    pub fn not(c: Constraint) -> Constraint {
        Constraint::Not(Box::new(c))
    }

    pub fn and(cs: impl IntoIterator<Item = Constraint>) -> Constraint {
        Constraint::And(cs.into_iter().collect())
    }

    pub fn or(cs: impl IntoIterator<Item = Constraint>) -> Constraint {
        Constraint::Or(cs.into_iter().collect())
    }

    /// `a -> b`, written as `!a | b`.
    pub fn implies(a: Constraint, b: Constraint) -> Constraint {
        Constraint::Or(vec![Constraint::not(a), b])
    }

    pub fn eval(&self, full: &[u16]) -> bool {
        match self {
            Constraint::Top => true,
            Constraint::Bottom => false,
            Constraint::Assign(v, val) => full[v.index()] == *val,
            Constraint::Not(c) => !c.eval(full),
            Constraint::And(cs) => cs.iter().all(|c| c.eval(full)),
            Constraint::Or(cs) => cs.iter().any(|c| c.eval(full)),
        }
    }

    pub fn eval3(&self, partial: &[u16]) -> Tri {
        match self {
            Constraint::Top => Tri::True,
            Constraint::Bottom => Tri::False,
            Constraint::Assign(v, val) => match partial[v.index()] {
                UNSET => Tri::Unknown,
                x if x == *val => Tri::True,
                _ => Tri::False,
            },
            Constraint::Not(c) => match c.eval3(partial) {
                Tri::True => Tri::False,
                Tri::False => Tri::True,
                Tri::Unknown => Tri::Unknown,
            },
            Constraint::And(cs) => {
                let mut out = Tri::True;
                for c in cs {
                    match c.eval3(partial) {
                        Tri::False => return Tri::False,
                        Tri::Unknown => out = Tri::Unknown,
                        Tri::True => {}
                    }
                }
                out
            }
            Constraint::Or(cs) => {
                let mut out = Tri::False;
                for c in cs {
                    match c.eval3(partial) {
                        Tri::True => return Tri::True,
                        Tri::Unknown => out = Tri::Unknown,
                        Tri::False => {}
                    }
                }
                out
            }
        }
    }

    /// First variable (left to right) that is unassigned in `partial`.
    pub fn first_unset(&self, partial: &[u16]) -> Option<VarId> {
        match self {
            Constraint::Top | Constraint::Bottom => None,
            Constraint::Assign(v, _) => (partial[v.index()] == UNSET).then_some(*v),
            Constraint::Not(c) => c.first_unset(partial),
            Constraint::And(cs) | Constraint::Or(cs) => cs.iter().find_map(|c| c.first_unset(partial)),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Constraint::Top | Constraint::Bottom => {}
            Constraint::Assign(v, _) => {
                out.insert(*v);
            }
            Constraint::Not(c) => c.collect_vars(out),
            Constraint::And(cs) | Constraint::Or(cs) => cs.iter().for_each(|c| c.collect_vars(out)),
        }
    }

    /// The assignments of a guard-shaped constraint: `Top`, a single
    /// assignment, or a conjunction of assignments.
    pub fn as_conjunction(&self) -> Option<Vec<(VarId, u16)>> {
        match self {
            Constraint::Top => Some(Vec::new()),
            Constraint::Assign(v, val) => Some(vec![(*v, *val)]),
            Constraint::And(cs) => {
                let mut out = Vec::with_capacity(cs.len());
                for c in cs {
                    out.extend(c.as_conjunction()?);
                }
                Some(out)
            }
            _ => None,
        }
    }
}

fn fingerprint_of(set: &BTreeSet<Constraint>) -> u64 {
    let mut h = std::hash::DefaultHasher::new();
    set.hash(&mut h);
    h.finish()
}

/// A knowledge base: declared variables and a set of constraints.
///
/// Values are immutable; `add`/`remove` return new knowledge bases.
#[derive(Clone)]
pub struct Kb {
    schema: Arc<Schema>,
    constraints: Arc<BTreeSet<Constraint>>,
    fingerprint: u64,
}

impl fmt::Debug for Kb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.constraints.iter().map(|c| self.schema.render(c)))
            .finish()
    }
}

impl PartialEq for Kb {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint
            && (Arc::ptr_eq(&self.constraints, &other.constraints) || self.constraints == other.constraints)
    }
}

impl Eq for Kb {}

impl Hash for Kb {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.fingerprint.hash(state);
    }
}

impl Kb {
    pub fn new(schema: Arc<Schema>) -> Self {
        Kb::from_set(schema, BTreeSet::new())
    }

    pub fn with_constraints(
        schema: Arc<Schema>,
        constraints: impl IntoIterator<Item = Constraint>,
    ) -> Result<Self, KbError> {
        let mut set = BTreeSet::new();
        for c in constraints {
            schema.check(&c)?;
            set.insert(c);
        }
        Ok(Kb::from_set(schema, set))
    }

    fn from_set(schema: Arc<Schema>, set: BTreeSet<Constraint>) -> Self {
        let fingerprint = fingerprint_of(&set);
        Kb {
            schema,
            constraints: Arc::new(set),
            fingerprint,
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn constraints(&self) -> &BTreeSet<Constraint> {
        &self.constraints
    }

    pub(crate) fn shared_constraints(&self) -> &Arc<BTreeSet<Constraint>> {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn add(&self, c: Constraint) -> Result<Kb, KbError> {
        self.schema.check(&c)?;
        Ok(self.add_unchecked(c))
    }

    /// `add` for constraints already known to be well formed.
    pub(crate) fn add_unchecked(&self, c: Constraint) -> Kb {
        if self.constraints.contains(&c) {
            return self.clone();
        }
        let mut set = (*self.constraints).clone();
        set.insert(c);
        Kb::from_set(self.schema.clone(), set)
    }

    pub fn remove(&self, c: &Constraint) -> Kb {
        if !self.constraints.contains(c) {
            return self.clone();
        }
        let mut set = (*self.constraints).clone();
        set.remove(c);
        Kb::from_set(self.schema.clone(), set)
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.constraints.contains(c)
    }

    pub fn entails(&self, c: &Constraint) -> Result<bool, KbError> {
        self.entails_with(&Backtracking, c)
    }

    pub fn sat(&self, c: &Constraint) -> Result<bool, KbError> {
        self.sat_with(&Backtracking, c)
    }

    pub fn consistent(&self) -> bool {
        Backtracking.satisfiable(self, None)
    }

    pub fn entails_with(&self, solver: &dyn Solver, c: &Constraint) -> Result<bool, KbError> {
        self.schema.check(c)?;
        Ok(!solver.satisfiable(self, Some(&Constraint::not(c.clone()))))
    }

    pub fn sat_with(&self, solver: &dyn Solver, c: &Constraint) -> Result<bool, KbError> {
        self.schema.check(c)?;
        Ok(solver.satisfiable(self, Some(c)))
    }

    /// Assignments to `vars` that extend to a model of the knowledge base.
    pub fn enumerate_models(&self, vars: &[VarId]) -> BTreeSet<Vec<u16>> {
        self.enumerate_models_with(&Backtracking, vars)
    }

    pub fn enumerate_models_with(&self, solver: &dyn Solver, vars: &[VarId]) -> BTreeSet<Vec<u16>> {
        let mut out = BTreeSet::new();
        if !solver.satisfiable(self, None) {
            return out;
        }
        let sizes: Vec<u16> = vars.iter().map(|v| self.schema.domain_size(*v)).collect();
        let mut current = vec![0u16; vars.len()];
        loop {
            let probe = Constraint::And(
                vars.iter()
                    .zip(&current)
                    .map(|(v, val)| Constraint::Assign(*v, *val))
                    .collect(),
            );
            if solver.satisfiable(self, Some(&probe)) {
                out.insert(current.clone());
            }
            if !advance(&mut current, &sizes) {
                break;
            }
        }
        out
    }
}

/// Odometer step over mixed-radix digits; false once it wraps around.
pub(crate) fn advance(digits: &mut [u16], sizes: &[u16]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < sizes[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}
