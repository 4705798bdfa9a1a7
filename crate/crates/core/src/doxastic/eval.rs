use std::sync::Arc;

use fixedbitset::FixedBitSet;

use crate::kb::Solver;

use super::{DoxError, DoxFormula, PlausibilityModel};

pub(super) fn truth_set(m: &PlausibilityModel, f: &DoxFormula, solver: &dyn Solver) -> Result<Arc<FixedBitSet>, DoxError> {
    let memoize = matches!(
        f,
        DoxFormula::Entailed(_) | DoxFormula::Succeeded(_) | DoxFormula::CondBelief(..)
    );
    if memoize {
        if let Some(s) = m.memo_get(f) {
            return Ok(s);
        }
    }
    let set = compute(m, f, solver)?;
    let set = Arc::new(set);
    if memoize {
        m.memo_put(f, set.clone());
    }
    Ok(set)
}

fn compute(m: &PlausibilityModel, f: &DoxFormula, solver: &dyn Solver) -> Result<FixedBitSet, DoxError> {
    let n = m.len();
    let mut out = FixedBitSet::with_capacity(n);
    match f {
        DoxFormula::Top => out.insert_range(..),
        DoxFormula::In(c) => {
            for (i, w) in m.worlds().iter().enumerate() {
                if w.kb.contains(c) {
                    out.insert(i);
                }
            }
        }
        DoxFormula::Entailed(c) => {
            for (i, w) in m.worlds().iter().enumerate() {
                if w.kb.entails_with(solver, c)? {
                    out.insert(i);
                }
            }
        }
        DoxFormula::Succeeded(sc) => {
            for (i, w) in m.worlds().iter().enumerate() {
                if sc.holds(&w.kb, solver)? {
                    out.insert(i);
                }
            }
        }
        DoxFormula::Not(inner) => {
            out.insert_range(..);
            out.difference_with(&*truth_set(m, inner, solver)?);
        }
        DoxFormula::And(fs) => {
            out.insert_range(..);
            for g in fs {
                out.intersect_with(&*truth_set(m, g, solver)?);
                if out.is_clear() {
                    break;
                }
            }
        }
        DoxFormula::CondBelief(a, cond, body) => {
            if a.index() >= m.agents().len() {
                return Err(DoxError::UnknownAgent(format!("#{}", a.0)));
            }
            let cond_set = match **cond {
                DoxFormula::Top => None,
                _ => Some(truth_set(m, cond, solver)?),
            };
            let body_set = truth_set(m, body, solver)?;
            let mut done = FixedBitSet::with_capacity(n);
            for w in 0..n {
                if done.contains(w) {
                    continue;
                }
                let comp = m.cc(*a, w);
                done.union_with(comp);
                let best = match &cond_set {
                    None => m.cc_min(*a, w).clone(),
                    Some(cs) => {
                        let mut s = comp.clone();
                        s.intersect_with(cs);
                        m.min_plausible(*a, &s)
                    }
                };
                if best.is_subset(&body_set) {
                    out.union_with(comp);
                }
            }
        }
    }
    Ok(out)
}
