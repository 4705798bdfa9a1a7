//! Satisfiability backends against truth-table enumeration.

use std::sync::Arc;

use epike_core::kb::{Backtracking, CachedSolver, Constraint, Enumerator, Kb, Schema, Session, Solver, VarDecl, VarId};
use proptest::prelude::*;

fn schema() -> Arc<Schema> {
    Arc::new(
        Schema::new([
            VarDecl::new("a", ["x", "y", "z"]),
            VarDecl::boolean("b"),
            VarDecl::new("c", ["p", "q"]),
            VarDecl::boolean("d"),
        ])
        .unwrap(),
    )
}

fn arb_constraint() -> impl Strategy<Value = Constraint> {
    let leaf = prop_oneof![
        1 => Just(Constraint::Top),
        1 => Just(Constraint::Bottom),
        8 => (0u32..4).prop_flat_map(|v| {
            let size: u16 = if v == 0 { 3 } else { 2 };
            (Just(v), 0..size)
        })
        .prop_map(|(v, x)| Constraint::Assign(VarId(v), x)),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Constraint::not),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Constraint::And),
            prop::collection::vec(inner, 0..3).prop_map(Constraint::Or),
        ]
    })
}

fn kb(cs: &[Constraint]) -> Kb {
    Kb::with_constraints(schema(), cs.iter().cloned()).unwrap()
}

proptest! {
    #[test]
    fn backends_agree(cs in prop::collection::vec(arb_constraint(), 0..5), extra in proptest::option::of(arb_constraint())) {
        let k = kb(&cs);
        let truth = Enumerator.satisfiable(&k, extra.as_ref());
        prop_assert_eq!(Backtracking.satisfiable(&k, extra.as_ref()), truth);
        let cached = CachedSolver::new();
        prop_assert_eq!(cached.satisfiable(&k, extra.as_ref()), truth);
        prop_assert_eq!(cached.satisfiable(&k, extra.as_ref()), truth);
    }

    #[test]
    fn entailment_is_dual_to_satisfiability(cs in prop::collection::vec(arb_constraint(), 0..4), c in arb_constraint()) {
        let k = kb(&cs);
        prop_assert_eq!(k.entails(&c).unwrap(), !k.sat(&Constraint::not(c.clone())).unwrap());
        if k.consistent() && k.entails(&c).unwrap() {
            prop_assert!(k.sat(&c).unwrap());
        }
    }

    #[test]
    fn insertion_order_is_irrelevant(cs in prop::collection::vec(arb_constraint(), 0..5)) {
        let forward = kb(&cs);
        let reversed: Vec<Constraint> = cs.iter().rev().cloned().collect();
        let backward = kb(&reversed);
        prop_assert_eq!(forward.fingerprint(), backward.fingerprint());
        prop_assert_eq!(forward.consistent(), backward.consistent());
        let added = cs.iter().fold(Kb::new(schema()), |k, c| k.add(c.clone()).unwrap());
        prop_assert_eq!(&added, &forward);
    }

    #[test]
    fn session_frames_track_the_assertions(
        base in prop::collection::vec(arb_constraint(), 0..3),
        frame in prop::collection::vec(arb_constraint(), 0..3),
    ) {
        let mut s = Session::new(schema());
        for c in &base {
            s.assert(c.clone());
        }
        prop_assert_eq!(s.check(), kb(&base).consistent());
        s.push();
        for c in &frame {
            s.assert(c.clone());
        }
        let all: Vec<Constraint> = base.iter().chain(&frame).cloned().collect();
        prop_assert_eq!(s.check(), Enumerator.satisfiable(&kb(&all), None));
        s.pop();
        prop_assert_eq!(s.depth(), 0);
        prop_assert_eq!(s.check(), kb(&base).consistent());
    }
}
