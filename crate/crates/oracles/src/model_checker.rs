//! Formula evaluation against a direct reading of the semantics on small
//! random models.

use std::sync::Arc;

use epike_core::doxastic::{AgentId, DoxFormula, PlausibilityModel, Preorder, World};
use epike_core::kb::{Backtracking, Constraint, Enumerator, Kb, Schema, Solver, VarDecl, VarId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VARS: usize = 3;

/// Per agent and world: (component, rank). Lower ranks are more plausible.
pub type Layout = Vec<Vec<(usize, usize)>>;

pub struct Case {
    pub model: PlausibilityModel,
    pub layout: Layout,
    pub kbs: Vec<Vec<Constraint>>,
}

fn pool() -> Vec<Constraint> {
    let a = |v: u32, x: u16| Constraint::Assign(VarId(v), x);
    vec![
        a(0, 0),
        a(1, 1),
        a(2, 0),
        Constraint::not(a(0, 0)),
        Constraint::or([a(1, 0), a(2, 1)]),
        Constraint::and([a(0, 1), a(1, 1)]),
        Constraint::implies(a(2, 0), a(0, 0)),
    ]
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let schema = Arc::new(Schema::new((0..VARS).map(|i| VarDecl::boolean(format!("x{i}")))).unwrap());
    let pool = pool();
    let n = rng.gen_range(1..=5);
    let kbs: Vec<Vec<Constraint>> = (0..n)
        .map(|_| {
            let k = rng.gen_range(0..=3);
            pool.choose_multiple(rng, k).cloned().collect()
        })
        .collect();
    let worlds = kbs
        .iter()
        .enumerate()
        .map(|(i, cs)| World::new(format!("w{i}"), Kb::with_constraints(schema.clone(), cs.clone()).unwrap()))
        .collect();
    let layout: Layout = (0..2)
        .map(|_| {
            let parts = rng.gen_range(1..=n);
            (0..n).map(|_| (rng.gen_range(0..parts), rng.gen_range(0..3))).collect()
        })
        .collect();
    let orders = layout
        .iter()
        .map(|l| {
            let pairs = (0..n).flat_map(|w| (0..n).map(move |v| (w, v)));
            Preorder::from_pairs(n, pairs.filter(|&(w, v)| l[w].0 == l[v].0 && l[w].1 <= l[v].1))
        })
        .collect();
    let agents: Arc<[String]> = ["a".to_string(), "b".to_string()].into_iter().collect();
    let model = PlausibilityModel::new(agents, worlds, orders).unwrap();
    Case { model, layout, kbs }
}

pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> DoxFormula {
    let pool = pool();
    let leaf = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => DoxFormula::Top,
        1 => DoxFormula::member(pool.choose(rng).unwrap().clone()),
        _ => DoxFormula::entailed(pool.choose(rng).unwrap().clone()),
    };
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng);
    }
    match rng.gen_range(0..4) {
        0 => DoxFormula::not(random_formula(rng, depth)),
        1 => DoxFormula::and([random_formula(rng, depth - 1), random_formula(rng, depth - 1)]),
        2 => DoxFormula::belief(AgentId(rng.gen_range(0..2)), random_formula(rng, depth - 1)),
        _ => DoxFormula::cond_belief(
            AgentId(rng.gen_range(0..2)),
            random_formula(rng, depth - 1),
            random_formula(rng, depth - 1),
        ),
    }
}

fn models_of(cs: &[Constraint]) -> Vec<Vec<u16>> {
    (0..1u16 << VARS)
        .map(|m| (0..VARS).map(|i| (m >> i) & 1).collect::<Vec<u16>>())
        .filter(|full| cs.iter().all(|c| c.eval(full)))
        .collect()
}

/// The semantics spelled out: `B^ψ_a φ` holds at `w` iff `φ` holds at the
/// lowest-ranked `ψ`-worlds of `w`'s component for `a`.
pub fn brute(case: &Case, w: usize, f: &DoxFormula) -> bool {
    match f {
        DoxFormula::Top => true,
        DoxFormula::In(c) => case.kbs[w].contains(c),
        DoxFormula::Entailed(c) => models_of(&case.kbs[w]).iter().all(|m| c.eval(m)),
        DoxFormula::Succeeded(_) => unreachable!(),
        DoxFormula::Not(g) => !brute(case, w, g),
        DoxFormula::And(gs) => gs.iter().all(|g| brute(case, w, g)),
        DoxFormula::CondBelief(a, cond, g) => {
            let l = &case.layout[a.index()];
            let candidates: Vec<usize> = (0..l.len()).filter(|&v| l[v].0 == l[w].0 && brute(case, v, cond)).collect();
            let Some(best) = candidates.iter().map(|&v| l[v].1).min() else { return true };
            candidates.iter().filter(|&&v| l[v].1 == best).all(|&v| brute(case, v, g))
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckerReport {
    pub pairs: usize,
    pub mismatches: Vec<String>,
    /// World-level evaluations that came out true.
    pub true_count: usize,
}

/// Evaluates `formulas` random formulas of depth three on each of `models`
/// random models, alternating solvers, and compares every world with
/// [`brute`].
pub fn check(models: usize, formulas: usize, seed: u64) -> CheckerReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = CheckerReport::default();
    for _ in 0..models {
        let case = random_case(&mut rng);
        for _ in 0..formulas {
            let f = random_formula(&mut rng, 3);
            let solver = if r.pairs % 2 == 0 { &Enumerator as &dyn Solver } else { &Backtracking };
            for w in 0..case.model.len() {
                match case.model.holds_at(w, &f, solver) {
                    Ok(got) if got == brute(&case, w, &f) => r.true_count += usize::from(got),
                    Ok(got) => r.mismatches.push(format!("world {w} of pair {}: got {got} for {f:?}", r.pairs)),
                    Err(e) => r.mismatches.push(format!("world {w} of pair {}: {e}", r.pairs)),
                }
            }
            r.pairs += 1;
        }
    }
    r
}
