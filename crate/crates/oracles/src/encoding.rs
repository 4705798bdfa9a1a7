//! The knowledge-base encoding against direct enumeration of subplans and
//! execution orders on random libraries.

use std::collections::BTreeSet;

use epike_core::kb::Enumerator;
use epike_core::planlib::{LibrarySpec, OrderingSpec, PlanLibrary, TimePointSpec, VariableSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Guard = Vec<(usize, usize)>;
/// Activated time points and ordering edges.
type Schedule = (Vec<usize>, Vec<(usize, usize)>);

struct Raw {
    domains: Vec<usize>,
    tps: Vec<Guard>,
    orderings: Vec<(usize, usize, Guard)>,
}

fn render(g: &Guard) -> String {
    match g.len() {
        0 => "true".into(),
        1 => format!("v{}=d{}", g[0].0, g[0].1),
        _ => format!(
            "({})",
            g.iter().map(|(v, x)| format!("v{v}=d{x}")).collect::<Vec<_>>().join(" & ")
        ),
    }
}

fn merge(a: &Guard, b: &Guard) -> Option<Guard> {
    let mut out = a.clone();
    for &(v, x) in b {
        match out.iter().find(|(w, _)| *w == v) {
            Some(&(_, y)) if y != x => return None,
            Some(_) => {}
            None => out.push((v, x)),
        }
    }
    out.sort();
    Some(out)
}

fn random_guard(rng: &mut ChaCha8Rng, domains: &[usize], max: usize) -> Guard {
    let k = rng.gen_range(0..=max.min(domains.len()));
    let mut vars: Vec<usize> = (0..domains.len()).collect();
    vars.shuffle(rng);
    let mut g: Guard = vars[..k].iter().map(|&v| (v, rng.gen_range(0..domains[v]))).collect();
    g.sort();
    g
}

fn random_library(rng: &mut ChaCha8Rng) -> Raw {
    let domains: Vec<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(2..=3)).collect();
    let tps: Vec<Guard> = (0..rng.gen_range(1..=6)).map(|_| random_guard(rng, &domains, 2)).collect();
    let mut orderings = Vec::new();
    if tps.len() > 1 {
        for _ in 0..rng.gen_range(0..=4) {
            let pred = rng.gen_range(0..tps.len());
            let mut succ = rng.gen_range(0..tps.len() - 1);
            if succ >= pred {
                succ += 1;
            }
            let extra = random_guard(rng, &domains, 1);
            if let Some(g) = merge(&tps[pred], &tps[succ]).and_then(|g| merge(&g, &extra)) {
                orderings.push((pred, succ, g));
            }
        }
    }
    Raw {
        domains,
        tps,
        orderings,
    }
}

fn spec(raw: &Raw, owners: &[usize]) -> LibrarySpec {
    let agents = ["A", "B"];
    LibrarySpec {
        agents: agents.iter().map(|a| a.to_string()).collect(),
        variables: raw
            .domains
            .iter()
            .enumerate()
            .map(|(i, &d)| VariableSpec {
                name: format!("v{i}"),
                domain: (0..d).map(|x| format!("d{x}")).collect(),
            })
            .collect(),
        timepoints: raw
            .tps
            .iter()
            .enumerate()
            .map(|(i, g)| TimePointSpec {
                id: format!("e{i}"),
                owner: agents[owners[i]].into(),
                guard: render(g),
            })
            .collect(),
        orderings: raw
            .orderings
            .iter()
            .map(|(p, s, g)| OrderingSpec {
                pred: format!("e{p}"),
                succ: format!("e{s}"),
                guard: render(g),
            })
            .collect(),
    }
}

fn holds(g: &Guard, plan: &[u16]) -> bool {
    g.iter().all(|&(v, x)| plan[v] as usize == x)
}

fn assignments(domains: &[usize]) -> Vec<Vec<u16>> {
    let mut out = vec![vec![]];
    for &d in domains {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u16>| {
                (0..d as u16).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Activated time points and orderings of a subplan, or `None` when the
/// activated orderings admit no total order.
fn schedule(raw: &Raw, plan: &[u16]) -> Option<Schedule> {
    let active: Vec<usize> = (0..raw.tps.len()).filter(|&t| holds(&raw.tps[t], plan)).collect();
    let edges: Vec<(usize, usize)> = raw
        .orderings
        .iter()
        .filter(|(_, _, g)| holds(g, plan))
        .map(|&(p, s, _)| (p, s))
        .collect();
    let mut placed: Vec<usize> = Vec::new();
    while placed.len() < active.len() {
        let next = active
            .iter()
            .find(|&&t| !placed.contains(&t) && edges.iter().all(|&(p, s)| s != t || placed.contains(&p)))?;
        placed.push(*next);
    }
    Some((active, edges))
}

fn compatible(raw: &Raw, plan: &[u16], prefix: &[usize]) -> bool {
    let Some((active, edges)) = schedule(raw, plan) else { return false };
    prefix.iter().enumerate().all(|(i, t)| {
        active.contains(t) && edges.iter().all(|&(p, s)| s != *t || prefix[..i].contains(&p))
    })
}

fn legal_prefix(rng: &mut ChaCha8Rng, raw: &Raw, plans: &[Vec<u16>]) -> Vec<usize> {
    let feasible: Vec<&Vec<u16>> = plans.iter().filter(|p| schedule(raw, p).is_some()).collect();
    let Some(plan) = feasible.choose(rng) else { return Vec::new() };
    let (active, edges) = schedule(raw, plan).unwrap();
    let mut order = Vec::new();
    let len = rng.gen_range(0..=active.len());
    while order.len() < len {
        let ready: Vec<usize> = active
            .iter()
            .copied()
            .filter(|t| !order.contains(t) && edges.iter().all(|&(p, s)| s != *t || order.contains(&p)))
            .collect();
        order.push(*ready.choose(rng).unwrap());
    }
    order
}

#[derive(Clone, Debug, Default)]
pub struct EncodingReport {
    pub cases: usize,
    /// One line per disagreement.
    pub mismatches: Vec<String>,
    /// Cases whose prefix leaves some subplan feasible.
    pub consistent: usize,
    pub successes: usize,
    /// Libraries whose orderings can form a cycle.
    pub cyclic: usize,
}

/// Compares consistency, feasible subplans and success on `cases` random
/// libraries with random prefixes, legal or not.
pub fn check(cases: usize, seed: u64) -> EncodingReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = EncodingReport {
        cases,
        ..EncodingReport::default()
    };
    for case in 0..cases {
        let raw = random_library(&mut rng);
        let owners: Vec<usize> = raw.tps.iter().map(|_| rng.gen_range(0..2)).collect();
        let lib = match PlanLibrary::from_spec(&spec(&raw, &owners)) {
            Ok(lib) => lib,
            Err(e) => {
                r.mismatches.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let plans = assignments(&raw.domains);
        r.cyclic += usize::from(!lib.nogoods().is_empty());
        let prefix = if rng.gen_bool(0.6) {
            legal_prefix(&mut rng, &raw, &plans)
        } else {
            let mut all: Vec<usize> = (0..raw.tps.len()).collect();
            all.shuffle(&mut rng);
            all.truncate(rng.gen_range(0..=raw.tps.len()));
            all
        };
        let mut kb = lib.compile_initial_kb([]).unwrap();
        let mut done = BTreeSet::new();
        for &t in &prefix {
            kb = lib.record_execution(&kb, t, &done).unwrap();
            done.insert(t);
        }
        let expected: BTreeSet<Vec<u16>> = plans.iter().filter(|p| compatible(&raw, p, &prefix)).cloned().collect();
        let success = expected.iter().any(|p| (0..raw.tps.len()).all(|t| !holds(&raw.tps[t], p) || done.contains(&t)));
        if kb.consistent() != !expected.is_empty() {
            r.mismatches.push(format!("case {case}: consistency, prefix {prefix:?}"));
        }
        if lib.feasible_subplans(&kb) != expected {
            r.mismatches.push(format!("case {case}: feasible subplans, prefix {prefix:?}"));
        }
        if lib.success_holds(&kb, &Enumerator) != success {
            r.mismatches.push(format!("case {case}: success, prefix {prefix:?}"));
        }
        r.consistent += usize::from(!expected.is_empty());
        r.successes += usize::from(success);
    }
    r
}
