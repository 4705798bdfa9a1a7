//! Shared test models.

use std::sync::Arc;

use crate::doxastic::{PlausibilityModel, PointedState, Preorder, World};
use crate::kb::Kb;
use crate::planlib::{LibrarySpec, OrderingSpec, PlanLibrary, TimePointSpec, VariableSpec};

pub const C1: &str = "((container=mug & drink=coffee) | (container=glass & drink=juice))";

pub fn breakfast_spec(ordered: bool) -> LibrarySpec {
    let tp = |id: &str, owner: &str, guard: &str| TimePointSpec {
        id: id.into(),
        owner: owner.into(),
        guard: guard.into(),
    };
    let mut orderings = Vec::new();
    if ordered {
        for (c, cv) in [("e_mug", "mug"), ("e_glass", "glass")] {
            for (d, dv) in [("e_coffee", "coffee"), ("e_juice", "juice")] {
                orderings.push(OrderingSpec {
                    pred: c.into(),
                    succ: d.into(),
                    guard: format!("(container={cv} & drink={dv})"),
                });
            }
        }
    }
    LibrarySpec {
        agents: vec!["R".into(), "H".into()],
        variables: vec![
            VariableSpec {
                name: "container".into(),
                domain: vec!["mug".into(), "glass".into()],
            },
            VariableSpec {
                name: "drink".into(),
                domain: vec!["coffee".into(), "juice".into()],
            },
        ],
        timepoints: vec![
            tp("e_mug", "R", "container=mug"),
            tp("e_glass", "R", "container=glass"),
            tp("e_coffee", "H", "drink=coffee"),
            tp("e_juice", "H", "drink=juice"),
        ],
        orderings,
    }
}


/// Raw two-world state before compilation: worlds hold the given constraint
/// texts, `orders` lists each agent's pairs, `true_world` is designated.
pub fn raw_state(lib: &PlanLibrary, worlds: &[(&str, &[&str])], orders: &[&[(usize, usize)]], designated: &[usize]) -> PointedState {
    let s = lib.schema();
    let ws = worlds
        .iter()
        .map(|(id, cs)| World::new(*id, Kb::with_constraints(s.clone(), cs.iter().map(|c| s.parse(c).unwrap())).unwrap()))
        .collect::<Vec<_>>();
    let n = ws.len();
    let order = orders.iter().map(|ps| Preorder::from_pairs(n, ps.iter().copied()).closure()).collect();
    let m = PlausibilityModel::new(lib.agents().clone(), ws, order).unwrap();
    PointedState::new(m, designated.iter().copied()).unwrap()
}

/// Case 1: the robot holds C1 (w1), the human finds w2 (no C1) more
/// plausible. Compiled, pointed at w1.
pub fn case1(ordered: bool) -> (Arc<PlanLibrary>, PointedState) {
    let lib = Arc::new(PlanLibrary::from_spec(&breakfast_spec(ordered)).unwrap());
    let raw = raw_state(&lib, &[("w1", &[C1]), ("w2", &[])], &[&[], &[(1, 0)]], &[0]);
    let s = lib.compile_initial_state(&raw).unwrap();
    (lib, s)
}

/// Case 2: C1 holds everywhere; the human has settled on coffee (w1) or
/// juice (w2) and the robot cannot tell which.
pub fn case2(ordered: bool) -> (Arc<PlanLibrary>, PointedState) {
    let lib = Arc::new(PlanLibrary::from_spec(&breakfast_spec(ordered)).unwrap());
    let raw = raw_state(
        &lib,
        &[("w1", &[C1, "drink=coffee"]), ("w2", &[C1, "drink=juice"])],
        &[&[(0, 1), (1, 0)], &[]],
        &[0, 1],
    );
    let s = lib.compile_initial_state(&raw).unwrap();
    (lib, s)
}

/// Case 3: the robot knows there is no glass (w1), the human does not care
/// (w2 is its favourite). Not yet pointed at any agent's view.
pub fn case3() -> (Arc<PlanLibrary>, PointedState) {
    let lib = Arc::new(PlanLibrary::from_spec(&breakfast_spec(false)).unwrap());
    let raw = raw_state(
        &lib,
        &[("w1", &[C1, "!(container=glass)"]), ("w2", &[C1])],
        &[&[], &[(1, 0)]],
        &[0],
    );
    let s = lib.compile_initial_state(&raw).unwrap();
    (lib, s)
}
