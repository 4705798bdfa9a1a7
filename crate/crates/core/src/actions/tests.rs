use super::*;
use crate::doxastic::{validate_model, PlausibilityModel};
use crate::fixtures::{case1, case2, raw_state, C1};
use crate::kb::{Backtracking, Kb};

const R: AgentId = AgentId(0);
const H: AgentId = AgentId(1);

fn ctx(lib: &PlanLibrary) -> FormulaContext<'_> {
    FormulaContext::new(lib.schema(), lib.agents()).with_success(lib.success_condition())
}

fn holds(lib: &PlanLibrary, s: &PointedState, text: &str) -> bool {
    s.satisfies(&ctx(lib).parse(text).unwrap(), &Backtracking).unwrap()
}

fn battery(lib: &PlanLibrary) -> Vec<DoxFormula> {
    let c = ctx(lib);
    [
        "in(((container=mug & drink=coffee) | (container=glass & drink=juice)))",
        "B[R](in(((container=mug & drink=coffee) | (container=glass & drink=juice))))",
        "B[H](sat((container=mug & drink=juice)))",
        "B[R](B[H](!in(((container=mug & drink=coffee) | (container=glass & drink=juice)))))",
        "B[H](B[R](B[H](entailed(drink=coffee))))",
        "B[H | in(drink=coffee)](sat(e_juice=T))",
        "B[R](suc)",
        "!B[H](!entailed(false))",
    ]
    .iter()
    .map(|t| c.parse(t).unwrap())
    .collect()
}

fn truths(s: &PointedState, fs: &[DoxFormula]) -> Vec<bool> {
    fs.iter().map(|f| s.satisfies(f, &Backtracking).unwrap()).collect()
}

#[test]
fn intent_adds_to_every_world() {
    let (lib, s) = case1(false);
    let c = lib.schema().parse("drink=coffee").unwrap();
    let act = mk_intent_announcement(R, c.clone());
    assert!(applicable(&s, &act, &Backtracking).unwrap());
    let up = product_update(&s, &act, &Backtracking).unwrap();
    let m = &up.state.model;
    assert_eq!(m.len(), 2);
    assert!(m.worlds().iter().all(|w| w.kb.contains(&c)));
    assert_eq!(m.world(0).id, "w1⊗intent");
    assert!(validate_model(m).is_empty());
    assert!(holds(&lib, &up.state, "B[H](entailed(drink=coffee))"));
}

#[test]
fn explaining_c1_removes_the_human_world() {
    let (lib, s) = case1(false);
    assert!(holds(&lib, &s, "B[H](!in(((container=mug & drink=coffee) | (container=glass & drink=juice))))"));
    let phi = ctx(&lib).parse(&format!("in({C1})")).unwrap();
    let up = product_update(&s, &mk_explanation(R, phi).unwrap(), &Backtracking).unwrap();
    assert_eq!(up.state.model.len(), 1);
    assert_eq!(up.state.model.world(0).id, "w1⊗explain");
    assert!(holds(&lib, &up.state, &format!("B[H](in({C1}))")));
}

#[test]
fn identity_update_keeps_battery() {
    for (lib, s) in [case1(false), case2(false)] {
        let fs = battery(&lib);
        let noop = mk_noop(R);
        let up = product_update(&s, &noop, &Backtracking).unwrap();
        assert_eq!(truths(&s, &fs), truths(&up.state, &fs));
        let generic = PointedAction {
            kind: ActionKind::Explain,
            payload: Payload::Formula(DoxFormula::Top),
            ..single(
                ActionKind::Explain,
                R,
                Payload::None,
                Event {
                    id: "skip".into(),
                    pre: DoxFormula::and([]),
                    post: Post::Noop,
                },
            )
        };
        let up = product_update(&s, &generic, &Backtracking).unwrap();
        assert_eq!(truths(&s, &fs), truths(&up.state, &fs));
    }
}

#[test]
fn commonly_believed_explanation_changes_nothing() {
    let (lib, s) = case2(false);
    let fs = battery(&lib);
    let phi = ctx(&lib).parse(&format!("in({C1})")).unwrap();
    let up = product_update(&s, &mk_explanation(H, phi).unwrap(), &Backtracking).unwrap();
    assert_eq!(up.state.model.len(), s.model.len());
    assert_eq!(truths(&s, &fs), truths(&up.state, &fs));
}

#[test]
fn execution_templates() {
    let (lib, _) = case1(false);
    let mug = mk_execution_action(&lib, lib.timepoint("e_mug").unwrap());
    assert_eq!(mug.model.events.len(), 1);
    assert_eq!(mug.actor, R);
    assert_eq!(mug.model.events[0].pre, ctx(&lib).parse("B[R](sat(e_mug=T))").unwrap());
    assert_eq!(mug.model.events[0].post, Post::Add(lib.schema().parse("e_mug=T").unwrap()));

    let (lib, _) = case1(true);
    let coffee = mk_execution_action(&lib, lib.timepoint("e_coffee").unwrap());
    assert_eq!(coffee.model.events.len(), 4);
    assert_eq!(coffee.designated.len(), 4);
    let eo = coffee.model.order.for_agent(R);
    assert!((0..4).all(|i| (0..4).all(|j| eo.equi(i, j))));
}

#[test]
fn coffee_before_container_fails() {
    let (lib, s) = case1(true);
    let coffee = mk_execution_action(&lib, lib.timepoint("e_coffee").unwrap());
    let up = product_update(&s, &coffee, &Backtracking).unwrap();
    let designated = up.state.designated()[0];
    let kb = &up.state.model.world(designated).kb;
    let expected = lib
        .schema()
        .parse("(e_coffee=T & !(container=mug & drink=coffee) & !(container=glass & drink=coffee))")
        .unwrap();
    assert!(kb.contains(&expected));
    assert!(!kb.consistent());
    assert!(holds(&lib, &up.state, "entailed(false)"));
}

#[test]
fn execution_never_grows_the_model() {
    let (lib, s) = case1(true);
    let mut state = s;
    for tp in ["e_mug", "e_coffee"] {
        let act = mk_execution_action(&lib, lib.timepoint(tp).unwrap());
        let before = state.model.len();
        state = product_update(&state, &act, &Backtracking).unwrap().state;
        assert!(state.model.len() <= before);
        assert!(validate_model(&state.model).is_empty());
    }
    assert!(holds(&lib, &state, "B[R](suc)"));
}

#[test]
fn juice_after_mug_depends_on_perspective() {
    let (lib, s) = case1(false);
    let mug = mk_execution_action(&lib, lib.timepoint("e_mug").unwrap());
    let s = product_update(&s, &mug, &Backtracking).unwrap().state;
    let juice = mk_execution_action(&lib, lib.timepoint("e_juice").unwrap());
    let human_view = s.local_perspective(H);
    assert_eq!(human_view.model.world(human_view.designated()[0]).id, "w2⊗e_mug");
    assert!(applicable(&human_view, &juice, &Backtracking).unwrap());
    assert!(!holds(&lib, &s, "B[R](sat(e_juice=T))"));
    assert!(holds(&lib, &s, "B[H](sat(e_juice=T))"));
}

#[test]
fn intent_then_conflicting_execution_is_inapplicable() {
    let (lib, s) = case1(false);
    let c = lib.schema().parse("drink=coffee").unwrap();
    let s = product_update(&s, &mk_intent_announcement(R, c), &Backtracking).unwrap().state;
    let juice = mk_execution_action(&lib, lib.timepoint("e_juice").unwrap());
    let human_view = s.local_perspective(H);
    assert!(!applicable(&human_view, &juice, &Backtracking).unwrap());
    assert_eq!(product_update(&human_view, &juice, &Backtracking).unwrap_err(), ActionError::Inapplicable);
}

#[test]
fn unbelieved_actions_are_inapplicable() {
    let (lib, s) = case1(false);
    let c = lib.schema().parse("(container=mug & drink=juice)").unwrap();
    assert!(!applicable(&s, &mk_intent_announcement(R, c), &Backtracking).unwrap());
    let lie = ctx(&lib).parse("!in(((container=mug & drink=coffee) | (container=glass & drink=juice)))").unwrap();
    assert!(!applicable(&s, &mk_explanation(R, lie).unwrap(), &Backtracking).unwrap());
    let never = single(
        ActionKind::Explain,
        R,
        Payload::None,
        Event {
            id: "never".into(),
            pre: DoxFormula::bottom(),
            post: Post::Noop,
        },
    );
    assert!(!applicable(&s, &never, &Backtracking).unwrap());
}

#[test]
fn restricted_grammar_enforced() {
    let (lib, _) = case1(false);
    let bad = ctx(&lib).parse("sat(drink=coffee)").unwrap();
    assert!(matches!(mk_explanation(R, bad.clone()), Err(ActionError::Restricted(_))));
    assert!(matches!(mk_question(R, H, bad), Err(ActionError::Restricted(_))));
    let ok = ctx(&lib).parse("in(drink=coffee)").unwrap();
    assert_eq!(mk_question(R, R, ok).unwrap_err(), ActionError::SelfQuestion);
}

#[test]
fn question_separates_the_intents() {
    let (lib, s) = case2(false);
    assert!(!holds(&lib, &s, "B[R](B[H](in(drink=coffee)))"));
    let phi = ctx(&lib).parse("in(drink=coffee)").unwrap();
    let q = mk_question(R, H, phi.clone()).unwrap();
    let up = product_update(&s, &q, &Backtracking).unwrap();
    assert_eq!(up.state.model.len(), 2);
    let either = "(B[R](B[H](in(drink=coffee))) | B[R](B[H](in(drink=juice))))";
    for g in up.state.split_globals() {
        assert!(holds(&lib, &g, either));
    }
    // Operational form: the reply from the true world w1.
    let truth = PointedState::new(s.model.clone(), [0]).unwrap();
    let answer = truthful_answer(&truth, H, &phi, &Backtracking).unwrap();
    assert_eq!(answer, Answer::Yes);
    let up = product_update(&s, &mk_answer(H, phi, answer).unwrap(), &Backtracking).unwrap();
    assert_eq!(up.state.model.len(), 1);
    assert!(holds(&lib, &up.state, "B[R](B[H](in(drink=coffee)))"));
}

#[test]
fn settled_question_refines_nothing() {
    let (lib, s) = case2(false);
    let fs = battery(&lib);
    let phi = ctx(&lib).parse(&format!("in({C1})")).unwrap();
    let up = product_update(&s, &mk_question(R, H, phi).unwrap(), &Backtracking).unwrap();
    assert_eq!(up.state.model.len(), s.model.len());
    assert_eq!(truths(&s, &fs), truths(&up.state, &fs));
}

/// H ranks w2 < w3 < w4 < w1. At w3 the robot wrongly believes C1 (its
/// favourite there is w4), so after the robot explains C1 the human's best
/// remaining world is w3, which still lacks C1.
#[test]
fn distrustful_human_keeps_its_belief() {
    let (lib, _) = case1(false);
    let raw = raw_state(
        &lib,
        &[("w1", &[C1]), ("w2", &[]), ("w3", &[]), ("w4", &[C1])],
        &[&[(3, 2)], &[(1, 2), (2, 3), (3, 0)]],
        &[0],
    );
    let s = lib.compile_initial_state(&raw).unwrap();
    assert!(validate_model(&s.model).is_empty());
    let not_c1 = format!("B[H](!in({C1}))");
    assert!(holds(&lib, &s, &not_c1));
    let phi = ctx(&lib).parse(&format!("in({C1})")).unwrap();
    let up = product_update(&s, &mk_explanation(R, phi).unwrap(), &Backtracking).unwrap();
    let ids: Vec<&str> = up.state.model.worlds().iter().map(|w| w.id.as_str()).collect();
    assert_eq!(ids, ["w1⊗explain", "w3⊗explain", "w4⊗explain"]);
    assert!(holds(&lib, &up.state, &not_c1));
    assert!(!holds(&lib, &up.state, &format!("B[H](in({C1}))")));
}

#[test]
fn implicit_revision() {
    let (lib, s) = case1(false);
    let mug = mk_execution_action(&lib, lib.timepoint("e_mug").unwrap());
    assert!(!detect_implicit_revision(&s, &mug, &Backtracking).unwrap());
    let phi = ctx(&lib).parse(&format!("in({C1})")).unwrap();
    assert!(!detect_implicit_revision(&s, &mk_explanation(R, phi).unwrap(), &Backtracking).unwrap());

    // The human expects juice (w2); taking the mug is impossible there.
    let raw = raw_state(&lib, &[("w1", &[C1]), ("w2", &[C1, "drink=juice"])], &[&[], &[(1, 0)]], &[0]);
    let s = lib.compile_initial_state(&raw).unwrap();
    assert!(detect_implicit_revision(&s, &mug, &Backtracking).unwrap());
}

#[test]
fn updates_track_their_origin() {
    let (lib, s) = case1(true);
    let coffee = mk_execution_action(&lib, lib.timepoint("e_coffee").unwrap());
    let up = product_update(&s, &coffee, &Backtracking).unwrap();
    for (i, &(w, e)) in up.origin.iter().enumerate() {
        let pre = &coffee.model.events[e].pre;
        assert!(s.model.holds_at(w, pre, &Backtracking).unwrap());
        let id = &up.state.model.world(i).id;
        assert_eq!(id, &format!("{}⊗{}", s.model.world(w).id, coffee.model.events[e].id));
    }
}

#[test]
fn wire_round_trip() {
    let (lib, s) = case2(true);
    let c = ctx(&lib);
    let phi = c.parse("B[H](!in(drink=juice))").unwrap();
    let acts = [
        mk_execution_action(&lib, lib.timepoint("e_coffee").unwrap()),
        mk_intent_announcement(H, lib.schema().parse("(drink=coffee | drink=juice)").unwrap()),
        mk_explanation(R, phi.clone()).unwrap(),
        mk_question(R, H, phi.clone()).unwrap(),
        mk_answer(H, phi, Answer::Unknown).unwrap(),
        mk_noop(R),
    ];
    for a in &acts {
        let w = a.encode(&lib);
        let json = serde_json::to_string(&w).unwrap();
        let back: WireAction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
        let decoded = PointedAction::decode(&back, &lib).unwrap();
        assert_eq!(&decoded, a);
        assert_eq!(decoded.model, a.model);
        assert_eq!(serde_json::to_string(&decoded.encode(&lib)).unwrap(), json);
    }
    let w = acts[3].encode(&lib);
    assert_eq!(w.kind, ActionKind::Ask);
    assert_eq!(w.askee.as_deref(), Some("H"));
    let bad = WireAction {
        kind: ActionKind::Execute,
        actor: "R".into(),
        payload: Some("e_coffee".into()),
        askee: None,
        answer: None,
    };
    assert!(matches!(PointedAction::decode(&bad, &lib), Err(ActionError::Wire(_))));
    let _ = s;
}

#[test]
fn model_stays_valid_across_a_run() {
    let (lib, s) = case1(false);
    let c = lib.schema().parse("drink=juice").unwrap();
    let steps = [
        mk_intent_announcement(R, c),
        mk_execution_action(&lib, lib.timepoint("e_juice").unwrap()),
        mk_execution_action(&lib, lib.timepoint("e_glass").unwrap()),
    ];
    let mut state = s;
    for a in &steps {
        state = product_update(&state, a, &Backtracking).unwrap().state;
        assert!(validate_model(&state.model).is_empty());
    }
    assert!(holds(&lib, &state, "(B[R](suc) & B[H](suc))"));
    let _: fn(&PlausibilityModel) = |_| ();
    let _ = Kb::new(lib.schema().clone());
}
