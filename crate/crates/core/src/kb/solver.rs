use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use super::{advance, Constraint, Kb, Schema, Tri, VarId, UNSET};

/// Satisfiability backend for knowledge-base queries.
pub trait Solver: Send + Sync {
    /// Whether `kb ∪ {extra}` has a satisfying full assignment.
    fn satisfiable(&self, kb: &Kb, extra: Option<&Constraint>) -> bool;
}

/// Truth-table enumeration over every declared variable. Exponential; meant
/// as an oracle for small problems.
#[derive(Clone, Copy, Debug, Default)]
pub struct Enumerator;

impl Solver for Enumerator {
    fn satisfiable(&self, kb: &Kb, extra: Option<&Constraint>) -> bool {
        let schema = kb.schema();
        let sizes: Vec<u16> = schema.ids().map(|v| schema.domain_size(v)).collect();
        let mut full = vec![0u16; sizes.len()];
        loop {
            if kb.constraints().iter().all(|c| c.eval(&full)) && extra.is_none_or(|c| c.eval(&full)) {
                return true;
            }
            if !advance(&mut full, &sizes) {
                return false;
            }
        }
    }
}

/// Chronological backtracking with Kleene evaluation of every constraint at
/// each node. Branches on the first unassigned variable of the first
/// undecided constraint, so variables no constraint mentions stay free.
#[derive(Clone, Copy, Debug, Default)]
pub struct Backtracking;

impl Solver for Backtracking {
    fn satisfiable(&self, kb: &Kb, extra: Option<&Constraint>) -> bool {
        let mut cs: Vec<&Constraint> = kb.constraints().iter().collect();
        cs.extend(extra);
        let mut partial = vec![UNSET; kb.schema().len()];
        solve(kb.schema(), &cs, &mut partial)
    }
}

fn solve(schema: &Schema, cs: &[&Constraint], partial: &mut [u16]) -> bool {
    let mut branch: Option<VarId> = None;
    for c in cs {
        match c.eval3(partial) {
            Tri::False => return false,
            Tri::True => {}
            Tri::Unknown => {
                if branch.is_none() {
                    branch = c.first_unset(partial);
                }
            }
        }
    }
    let Some(var) = branch else {
        return true;
    };
    for val in 0..schema.domain_size(var) {
        partial[var.index()] = val;
        if solve(schema, cs, partial) {
            return true;
        }
    }
    partial[var.index()] = UNSET;
    false
}

/// Incremental assertion stack with push/pop frames.
///
/// The last satisfying (partial) assignment is kept as a witness; `check`
/// first tries it against the current assertions and only searches when the
/// witness no longer decides them.
#[derive(Clone, Debug)]
pub struct Session {
    schema: Arc<Schema>,
    assertions: Vec<Constraint>,
    frames: Vec<usize>,
    witness: Option<Vec<u16>>,
}

impl Session {
    pub fn new(schema: Arc<Schema>) -> Self {
        Session {
            schema,
            assertions: Vec::new(),
            frames: Vec::new(),
            witness: None,
        }
    }

    pub fn with_witness(schema: Arc<Schema>, witness: Vec<u16>) -> Self {
        let mut s = Session::new(schema);
        s.witness = Some(witness);
        s
    }

    pub fn assert(&mut self, c: Constraint) {
        self.assertions.push(c);
    }

    pub fn push(&mut self) {
        self.frames.push(self.assertions.len());
    }

    /// Drops every assertion made since the matching `push`. No-op without
    /// an open frame.
    pub fn pop(&mut self) {
        if let Some(len) = self.frames.pop() {
            self.assertions.truncate(len);
        }
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn check(&mut self) -> bool {
        if let Some(w) = &self.witness {
            if self.assertions.iter().all(|c| c.eval3(w) == Tri::True) {
                return true;
            }
        }
        let cs: Vec<&Constraint> = self.assertions.iter().collect();
        let mut partial = vec![UNSET; self.schema.len()];
        if solve(&self.schema, &cs, &mut partial) {
            self.witness = Some(partial);
            true
        } else {
            false
        }
    }

    pub fn witness(&self) -> Option<&[u16]> {
        self.witness.as_deref()
    }
}

#[derive(Clone)]
struct KbKey {
    fingerprint: u64,
    set: Arc<BTreeSet<Constraint>>,
}

impl PartialEq for KbKey {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint && (Arc::ptr_eq(&self.set, &other.set) || self.set == other.set)
    }
}

impl Eq for KbKey {}

impl Hash for KbKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.fingerprint.hash(state);
    }
}

const CACHE_LIMIT: usize = 1 << 18;

/// Backtracking behind a query cache keyed by (constraint set, query), with
/// per-knowledge-base witnesses reused across queries.
///
/// Safe to share between threads; lookups and inserts are serialized by a
/// mutex. The cache is cleared wholesale once it exceeds a fixed size.
#[derive(Default)]
pub struct CachedSolver {
    queries: Mutex<FxHashMap<(KbKey, Option<Constraint>), bool>>,
    witnesses: Mutex<FxHashMap<KbKey, Option<Arc<Vec<u16>>>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CachedSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// (hits, misses) since construction.
    pub fn stats(&self) -> (u64, u64) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }

    pub fn clear(&self) {
        self.queries.lock().unwrap().clear();
        self.witnesses.lock().unwrap().clear();
    }

    fn witness(&self, kb: &Kb, key: &KbKey) -> Option<Arc<Vec<u16>>> {
        if let Some(w) = self.witnesses.lock().unwrap().get(key) {
            return w.clone();
        }
        let mut session = Session::new(kb.schema().clone());
        for c in kb.constraints() {
            session.assert(c.clone());
        }
        let found = session.check().then(|| Arc::new(session.witness().unwrap().to_vec()));
        let mut map = self.witnesses.lock().unwrap();
        if map.len() > CACHE_LIMIT {
            map.clear();
        }
        map.insert(key.clone(), found.clone());
        found
    }
}

impl Solver for CachedSolver {
    fn satisfiable(&self, kb: &Kb, extra: Option<&Constraint>) -> bool {
        let key = KbKey {
            fingerprint: kb.fingerprint(),
            set: kb.shared_constraints().clone(),
        };
        let query = (key, extra.cloned());
        if let Some(v) = self.queries.lock().unwrap().get(&query) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return *v;
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let result = match self.witness(kb, &query.0) {
            None => false,
            Some(w) => match extra {
                None => true,
                Some(c) if c.eval3(&w) == Tri::True => true,
                Some(c) => {
                    let mut session = Session::with_witness(kb.schema().clone(), (*w).clone());
                    for k in kb.constraints() {
                        session.assert(k.clone());
                    }
                    session.push();
                    session.assert(c.clone());
                    let sat = session.check();
                    session.pop();
                    sat
                }
            },
        };
        let mut map = self.queries.lock().unwrap();
        if map.len() > CACHE_LIMIT {
            map.clear();
        }
        map.insert(query, result);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::VarDecl;

    fn schema() -> Arc<Schema> {
        Arc::new(Schema::new([VarDecl::new("x", ["a", "b", "c"]), VarDecl::boolean("p")]).unwrap())
    }

    #[test]
    fn session_push_pop() {
        let s = schema();
        let mut session = Session::new(s.clone());
        session.assert(s.parse("(x=a | x=b)").unwrap());
        assert!(session.check());
        session.push();
        session.assert(s.parse("x=c").unwrap());
        assert!(!session.check());
        session.pop();
        assert_eq!(session.depth(), 0);
        assert!(session.check());
        session.pop();
        assert!(session.check());
    }

    #[test]
    fn witness_reused_when_still_valid() {
        let s = schema();
        let mut session = Session::new(s.clone());
        session.assert(s.parse("x=b").unwrap());
        assert!(session.check());
        let w = session.witness().unwrap().to_vec();
        session.push();
        session.assert(s.parse("!(x=a)").unwrap());
        assert!(session.check());
        assert_eq!(session.witness().unwrap(), &w[..]);
    }

    #[test]
    fn cached_agrees_and_counts_hits() {
        let s = schema();
        let kb = Kb::with_constraints(s.clone(), [s.parse("(!(p=T) | x=a)").unwrap()]).unwrap();
        let solver = CachedSolver::new();
        let q = s.parse("(p=T & x=b)").unwrap();
        assert!(!solver.satisfiable(&kb, Some(&q)));
        assert!(!solver.satisfiable(&kb, Some(&q)));
        assert_eq!(solver.stats(), (1, 1));
        assert!(solver.satisfiable(&kb, Some(&s.parse("p=T").unwrap())));
        assert!(!Enumerator.satisfiable(&kb, Some(&q)));
    }
}
