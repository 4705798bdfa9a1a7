//! Random sequential tasks where two agents disagree on a few constraints.
//!
//! Each decision variable has one time point per value. Consecutive
//! variables are linked by orderings over the first `num_orders` links, and
//! `num_constraints` binary nogoods `!(vi=a & vj=b)` restrict the choices.
//! The first agent knows every constraint; the second finds worlds missing
//! the `diff` differing constraints more plausible, the fewer the better.

use std::collections::BTreeMap;

use epike_core::kb::Backtracking;
use epike_core::planlib::{LibrarySpec, OrderingSpec, PlanLibrary, TimePointSpec, VariableSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{PlausibilitySpec, Relation, ScenarioFile, WorldSpec, FORMAT};

pub const AGENTS: [&str; 2] = ["X", "Y"];
const ATTEMPTS: usize = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("diff ({diff}) exceeds the number of constraints ({constraints})")]
    DiffTooLarge { diff: usize, constraints: usize },
    #[error("{orders} ordering links need at least {} variables", orders + 1)]
    TooManyOrders { orders: usize },
    #[error("need at least two variables and domains of size two")]
    TooSmall,
    #[error("no task with these parameters found after {0} attempts")]
    Exhausted(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskParams {
    pub num_variables: usize,
    pub num_orders: usize,
    pub num_constraints: usize,
    pub diff: usize,
    pub domain_size: usize,
    pub seed: u64,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            num_variables: 3,
            num_orders: 2,
            num_constraints: 3,
            diff: 0,
            domain_size: 2,
            seed: 0,
        }
    }
}

fn var(i: usize) -> String {
    format!("v{i}")
}

fn value(x: usize) -> String {
    ((b'a' + x as u8) as char).to_string()
}

fn tp(i: usize, x: usize) -> String {
    format!("v{i}_{}", value(x))
}

fn nogood(c: &(usize, usize, usize, usize)) -> String {
    let &(i, a, j, b) = c;
    format!("!({}={} & {}={})", var(i), value(a), var(j), value(b))
}

pub fn generate(params: &TaskParams) -> Result<ScenarioFile, GenerateError> {
    let p = params;
    if p.diff > p.num_constraints {
        return Err(GenerateError::DiffTooLarge {
            diff: p.diff,
            constraints: p.num_constraints,
        });
    }
    if p.num_variables < 2 || p.domain_size < 2 {
        return Err(GenerateError::TooSmall);
    }
    if p.num_orders >= p.num_variables {
        return Err(GenerateError::TooManyOrders { orders: p.num_orders });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    for _ in 0..ATTEMPTS {
        if let Some(file) = attempt(p, &mut rng) {
            return Ok(file);
        }
    }
    Err(GenerateError::Exhausted(ATTEMPTS))
}

fn library(p: &TaskParams, rng: &mut ChaCha8Rng) -> LibrarySpec {
    let n = p.num_variables;
    let d = p.domain_size;
    let mut owners: Vec<usize> = (0..n * d).map(|_| rng.gen_range(0..2)).collect();
    for a in 0..2 {
        if !owners.contains(&a) {
            let k = rng.gen_range(0..owners.len());
            owners[k] = a;
        }
    }
    let mut timepoints = Vec::new();
    for i in 0..n {
        for x in 0..d {
            timepoints.push(TimePointSpec {
                id: tp(i, x),
                owner: AGENTS[owners[i * d + x]].into(),
                guard: format!("{}={}", var(i), value(x)),
            });
        }
    }
    let mut orderings = Vec::new();
    for i in 0..p.num_orders {
        for x in 0..d {
            for y in 0..d {
                orderings.push(OrderingSpec {
                    pred: tp(i, x),
                    succ: tp(i + 1, y),
                    guard: format!("({}={} & {}={})", var(i), value(x), var(i + 1), value(y)),
                });
            }
        }
    }
    LibrarySpec {
        agents: AGENTS.iter().map(|a| a.to_string()).collect(),
        variables: (0..n)
            .map(|i| VariableSpec {
                name: var(i),
                domain: (0..d).map(value).collect(),
            })
            .collect(),
        timepoints,
        orderings,
    }
}

fn attempt(p: &TaskParams, rng: &mut ChaCha8Rng) -> Option<ScenarioFile> {
    let spec = library(p, rng);
    let lib = PlanLibrary::from_spec(&spec).expect("generated libraries are well formed");
    let schema = lib.schema();
    let parse = |c: &str| schema.parse(c).expect("generated constraints parse");
    let mut constraints: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut tries = 0;
    while constraints.len() < p.num_constraints {
        tries += 1;
        if tries > 50 * (p.num_constraints + 1) {
            return None;
        }
        let i = rng.gen_range(0..p.num_variables);
        let mut j = rng.gen_range(0..p.num_variables - 1);
        if j >= i {
            j += 1;
        }
        let c = (i, rng.gen_range(0..p.domain_size), j, rng.gen_range(0..p.domain_size));
        let mirrored = (c.2, c.3, c.0, c.1);
        if constraints.contains(&c) || constraints.contains(&mirrored) {
            continue;
        }
        let mut all: Vec<String> = constraints.iter().map(nogood).collect();
        all.push(nogood(&c));
        let kb = lib.compile_initial_kb(all.iter().map(|s| parse(s))).ok()?;
        if lib.feasible_subplans(&kb).is_empty() {
            continue;
        }
        constraints.push(c);
    }
    let mut order: Vec<usize> = (0..constraints.len()).collect();
    order.shuffle(rng);
    let differing: Vec<usize> = order[..p.diff].to_vec();
    let text: Vec<String> = constraints.iter().map(nogood).collect();
    // A differing constraint must say something the others do not.
    for &k in &differing {
        let rest = text.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, s)| parse(s));
        let kb = lib.compile_initial_kb(rest).ok()?;
        if kb.entails_with(&Backtracking, &parse(&text[k])).ok()? {
            return None;
        }
    }
    let shared: Vec<String> = (0..text.len()).filter(|i| !differing.contains(i)).map(|i| text[i].clone()).collect();
    let full = (1usize << p.diff) - 1;
    let world_id = |mask: usize| format!("w{mask}");
    let worlds: Vec<WorldSpec> = (0..=full)
        .map(|mask| WorldSpec {
            id: world_id(mask),
            constraints: shared
                .iter()
                .cloned()
                .chain((0..p.diff).filter(|b| mask & (1 << b) != 0).map(|b| text[differing[b]].clone()))
                .collect(),
        })
        .collect();
    // The second agent ranks worlds by how many differing constraints they hold.
    let mut plausibility = Vec::new();
    for w in 0..=full {
        for v in 0..=full {
            let (cw, cv) = (w.count_ones(), v.count_ones());
            if w != v && (cw < cv || (cw == cv && w < v)) {
                plausibility.push(PlausibilitySpec {
                    agent: AGENTS[1].into(),
                    from: world_id(w),
                    to: world_id(v),
                    kind: if cw < cv { Relation::Strict } else { Relation::Equi },
                });
            }
        }
    }
    let mut designated = BTreeMap::new();
    designated.insert(AGENTS[0].to_string(), vec![world_id(full)]);
    designated.insert(AGENTS[1].to_string(), (0..=full).map(world_id).collect());
    Some(ScenarioFile {
        format: FORMAT,
        name: format!(
            "random-v{}-o{}-c{}-d{}-s{}",
            p.num_variables, p.num_orders, p.num_constraints, p.diff, p.seed
        ),
        library: spec,
        worlds,
        plausibility,
        designated,
        true_world: world_id(full),
        prefix: Vec::new(),
    })
}
