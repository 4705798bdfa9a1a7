use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::actions::{mk_execution_action, Payload};
use crate::doxastic::FormulaContext;
use crate::fixtures::{case1, case2, C1};
use crate::kb::CachedSolver;

const EPS: f64 = 1e-12;

fn score(kind: ActionKind, sc: f64, oc: f64) -> ActionScore {
    ActionScore { kind, sc, oc }
}

fn dv(p_noop: f64, expected: f64) -> DecisionValue {
    DecisionValue { p_noop, expected }
}

#[test]
fn decision_backup_values() {
    use ActionKind::*;
    assert!((backup_decision(&[score(Execute, 1.0, 1.0)]) - 1.0).abs() < EPS);
    let two = [score(Execute, 0.8, 0.5), score(Explain, 0.8, 1.0), score(Execute, 0.3, 1.0)];
    assert!((backup_decision(&two) - 0.75).abs() < EPS);
    assert_eq!(backup_decision(&[score(Noop, 1.0, 0.7)]), 0.0);
    assert_eq!(decision_value(&[score(Noop, 1.0, 0.0)]), dv(1.0, 0.0));
}

#[test]
fn nothing_positive_means_waiting() {
    let d = decision_value(&[score(ActionKind::Execute, 0.0, 1.0)]);
    assert_eq!(d, dv(1.0, 0.0));
    assert_eq!(decision_value(&[]), dv(1.0, 0.0));
}

#[test]
fn perfect_execution_shadows_noop() {
    use ActionKind::*;
    let d = decision_value(&[score(Execute, 1.0, 0.5), score(Noop, 1.0, 0.0)]);
    assert_eq!(d, dv(0.0, 0.5));
    let d = decision_value(&[score(Execute, 0.9, 0.5), score(Noop, 0.9, 0.0)]);
    assert!((d.p_noop - 0.5).abs() < EPS && (d.expected - 0.25).abs() < EPS);
}

#[test]
fn predict_backup_values() {
    assert_eq!(backup_predict(&[dv(1.0, 0.0), dv(1.0, 0.0)]), 0.0);
    assert!((backup_predict(&[dv(0.0, 1.0), dv(1.0, 0.0)]) - 1.0).abs() < EPS);
    assert!((backup_predict(&[dv(0.5, 0.4), dv(0.5, 0.4)]) - 0.6).abs() < EPS);
}

#[test]
fn split_backup_values() {
    let p = Penalties::default();
    assert!((backup_split(&[1.0, 0.6], p.factor(ActionKind::Explain)) - 0.54).abs() < EPS);
    assert_eq!(backup_split(&[1.0], p.factor(ActionKind::Execute)), 1.0);
    assert_eq!(backup_split(&[0.0, 1.0], p.factor(ActionKind::Intent)), 0.0);
}

#[test]
fn selection_rules() {
    assert_eq!(select_split_child(&[(0.2, 4), (0.9, 4)], 1.4, 8), Some(0));
    assert_eq!(select_split_child(&[(0.2, 4), (0.9, 0)], 1.4, 4), Some(1));
    assert_eq!(ucb1(0.3, 2.0, 10, 0), f64::INFINITY);
    assert!(prefer_subjective(3, 5));
    assert!(prefer_subjective(4, 4));
    assert!(!prefer_subjective(5, 3));
}

#[test]
fn kind_sets() {
    let s = KindSet::of(&[ActionKind::Execute, ActionKind::Ask]);
    assert!(s.contains(ActionKind::Ask) && !s.contains(ActionKind::Noop));
    assert!(s.without(ActionKind::Ask).without(ActionKind::Execute).is_empty());
    let c = SearchConfig::for_subroutine(Termination::SearchAction).without_communication();
    assert!(!c.ego_kinds.contains(ActionKind::Explain) && c.ego_kinds.contains(ActionKind::Noop));
}

/// Case 1 after everyone agreed on C1: a one-world, common-knowledge state.
fn common_knowledge() -> (std::sync::Arc<PlanLibrary>, PointedState) {
    let (lib, s) = case1(false);
    let ctx = FormulaContext::new(lib.schema(), lib.agents());
    let c1 = ctx.parse(&format!("in({C1})")).unwrap();
    let r = lib.agent("R").unwrap();
    let act = crate::actions::mk_explanation(r, c1).unwrap();
    let up = product_update(&s, &act, &CachedSolver::new()).unwrap();
    (lib, up.state)
}

#[test]
fn terminal_utilities() {
    let solver = CachedSolver::new();
    let (lib, s) = common_knowledge();
    let r = lib.agent("R").unwrap();
    let suc = DoxFormula::Succeeded(lib.success_condition().clone());
    let t = |s: &PointedState, term, depth| terminal_utility(s, term, r, 3, depth, &solver, &suc).unwrap();
    assert_eq!(t(&s, Termination::SearchAction, 0), None);
    assert_eq!(t(&s, Termination::SearchAction, 3), Some(1.0));
    assert_eq!(t(&s, Termination::ExplainSuccess, 0), None);

    let juice = mk_execution_action(&lib, lib.timepoint("e_juice").unwrap());
    let mut done = s.clone();
    for tp in ["e_mug", "e_coffee"] {
        done = product_update(&done, &mk_execution_action(&lib, lib.timepoint(tp).unwrap()), &solver)
            .unwrap()
            .state;
    }
    assert_eq!(t(&done, Termination::SearchAction, 2), Some(1.0));
    assert_eq!(t(&done, Termination::ExplainSuccess, 2), Some(1.0));

    let mugged = product_update(&s, &mk_execution_action(&lib, lib.timepoint("e_mug").unwrap()), &solver).unwrap();
    assert!(product_update(&mugged.state, &juice, &solver).is_err());
    let kb = &mugged.state.model.world(mugged.state.designated()[0]).kb;
    let broken = kb.add_unchecked(lib.executed(lib.timepoint("e_juice").unwrap()));
    let mut worlds: Vec<_> = mugged.state.model.worlds().to_vec();
    let w = mugged.state.designated()[0];
    worlds[w] = crate::doxastic::World::new("broken", broken);
    let m = crate::doxastic::PlausibilityModel::new(lib.agents().clone(), worlds, mugged.state.model.orders().to_vec()).unwrap();
    let failed = PointedState::new(m, [w]).unwrap();
    assert_eq!(t(&failed, Termination::SearchAction, 1), Some(0.0));
    assert_eq!(t(&failed, Termination::ExplainFailure, 1), Some(1.0));
    assert_eq!(t(&failed, Termination::AskIfFailure, 1), Some(1.0));
}

fn run(state: &PointedState, lib: &PlanLibrary, ego: AgentId, cfg: &SearchConfig, seed: u64) -> SearchOutcome {
    let solver = CachedSolver::new();
    let ctx = SearchContext { lib, solver: &solver };
    search(state, ego, cfg, &ctx, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn payload(lib: &PlanLibrary, c: &Choice) -> String {
    match c {
        Choice::Act(a) => a.describe(lib),
        Choice::Noop => "noop".into(),
        Choice::None => "none".into(),
    }
}

#[test]
fn common_knowledge_rollouts_succeed() {
    let (lib, s) = common_knowledge();
    let r = lib.agent("R").unwrap();
    let cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    let solver = CachedSolver::new();
    let ctx = SearchContext { lib: &lib, solver: &solver };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        assert_eq!(simulate(&s, r, &cfg, &ctx, 0, &mut rng).unwrap(), 1.0);
    }
}

#[test]
fn stuck_rollout_scores_zero() {
    let (lib, s) = common_knowledge();
    let r = lib.agent("R").unwrap();
    let mut cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    cfg.ego_kinds = KindSet::of(&[ActionKind::Noop]);
    cfg.other_kinds = KindSet::of(&[ActionKind::Noop]);
    let solver = CachedSolver::new();
    let ctx = SearchContext { lib: &lib, solver: &solver };
    assert_eq!(simulate(&s, r, &cfg, &ctx, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), 0.0);
}

#[test]
fn common_knowledge_search_acts() {
    let (lib, s) = common_knowledge();
    let mut cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    cfg.iteration_cap = 200;
    for ego in ["R", "H"] {
        let a = lib.agent(ego).unwrap();
        for seed in 0..5 {
            let out = run(&s.components_of(a), &lib, a, &cfg, seed);
            let Choice::Act(act) = &out.choice else {
                panic!("{ego} chose {}", payload(&lib, &out.choice))
            };
            assert_eq!(act.kind, ActionKind::Execute);
        }
    }
}

#[test]
fn robot_fetches_the_glass_for_juice() {
    let (lib, s) = case1(false);
    let solver = CachedSolver::new();
    let r = lib.agent("R").unwrap();
    let juice = mk_execution_action(&lib, lib.timepoint("e_juice").unwrap());
    let after = product_update(&s.components_of(r), &juice, &solver).unwrap().state;
    let cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    let out = run(&after, &lib, r, &cfg, 7);
    assert_eq!(payload(&lib, &out.choice), "R execute e_glass");
}

#[test]
fn robot_explains_before_an_unexpected_mug() {
    let (lib, s) = case1(true);
    let r = lib.agent("R").unwrap();
    let cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    let out = run(&s.components_of(r), &lib, r, &cfg, 1);
    let Choice::Act(act) = &out.choice else { panic!("no action") };
    assert_eq!(act.kind, ActionKind::Explain, "{}", act.describe(&lib));
    let Payload::Formula(f) = &act.payload else { unreachable!() };
    let ctx = FormulaContext::new(lib.schema(), lib.agents());
    assert_eq!(*f, ctx.parse(&format!("in({C1})")).unwrap());
    let mug = out.root.iter().find(|e| e.action.kind == ActionKind::Execute).unwrap();
    assert!(mug.score < 0.9 - 1e-9);
}

#[test]
fn robot_waits_or_asks_when_unsure_of_the_drink() {
    let (lib, s) = case2(false);
    let r = lib.agent("R").unwrap();
    let cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    let out = run(&s.components_of(r), &lib, r, &cfg, 2);
    match &out.choice {
        Choice::Noop => {}
        Choice::Act(a) => assert_eq!(a.kind, ActionKind::Ask, "{}", a.describe(&lib)),
        Choice::None => panic!("no choice"),
    }
}

#[test]
fn ordering_forces_a_question() {
    let (lib, s) = case2(true);
    let r = lib.agent("R").unwrap();
    let cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    let out = run(&s.components_of(r), &lib, r, &cfg, 2);
    let Choice::Act(a) = &out.choice else { panic!("{}", payload(&lib, &out.choice)) };
    assert_eq!(a.kind, ActionKind::Ask, "{}", a.describe(&lib));
}

#[test]
fn seeded_search_is_deterministic() {
    let (lib, s) = case1(true);
    let r = lib.agent("R").unwrap();
    let mut cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    cfg.record_trace = true;
    cfg.stop_when_solved = false;
    cfg.iteration_cap = 150;
    let a = run(&s.components_of(r), &lib, r, &cfg, 11);
    let b = run(&s.components_of(r), &lib, r, &cfg, 11);
    assert_eq!(a.choice, b.choice);
    assert_eq!(a.iterations, 150);
    assert_eq!(serde_json::to_string(&a.trace).unwrap(), serde_json::to_string(&b.trace).unwrap());
}

#[test]
fn no_candidates_means_no_choice() {
    let (lib, s) = common_knowledge();
    let r = lib.agent("R").unwrap();
    let mut cfg = SearchConfig::for_subroutine(Termination::SearchAction);
    cfg.ego_kinds = KindSet::EMPTY;
    let out = run(&s, &lib, r, &cfg, 0);
    assert_eq!(out.choice, Choice::None);
    assert_eq!(out.stop, StopReason::NoCandidates);
}

#[test]
fn ties_prefer_acting() {
    let (lib, _) = common_knowledge();
    let r = lib.agent("R").unwrap();
    let e = mk_execution_action(&lib, 0);
    let scores = |noop: f64, exec: f64| {
        vec![
            RootScore {
                action: crate::actions::mk_noop(r),
                score: noop,
                visits: 1,
            },
            RootScore {
                action: e.clone(),
                score: exec,
                visits: 1,
            },
        ]
    };
    assert_eq!(choose(&scores(1.0, 1.0), false), Choice::Act(e.clone()));
    assert_eq!(choose(&scores(1.0, 0.5), false), Choice::Noop);
    assert_eq!(choose(&scores(1.0, 0.5), true), Choice::Act(e.clone()));
    assert_eq!(choose(&scores(0.0, 0.0), false), Choice::None);
}

fn unit() -> impl Strategy<Value = f64> {
    (0u32..=20).prop_map(|x| x as f64 / 20.0)
}

fn kind() -> impl Strategy<Value = ActionKind> {
    prop::sample::select(vec![
        ActionKind::Execute,
        ActionKind::Noop,
        ActionKind::Intent,
        ActionKind::Explain,
        ActionKind::Ask,
    ])
}

proptest! {
    #[test]
    fn backups_stay_in_range(
        acts in prop::collection::vec((kind(), unit(), unit()), 0..6),
        agents in prop::collection::vec((unit(), unit()), 1..4),
        children in prop::collection::vec(unit(), 1..5),
        penalty in unit(),
    ) {
        let scores: Vec<ActionScore> = acts.iter().map(|&(k, sc, oc)| score(k, sc, oc)).collect();
        let d = decision_value(&scores);
        prop_assert!((0.0..=1.0).contains(&d.p_noop) && (0.0..=1.0 + EPS).contains(&d.expected));
        // A decision value never expects more than its acting mass.
        let vals: Vec<DecisionValue> = agents.iter().map(|&(p, e)| dv(p, e * (1.0 - p))).collect();
        let v = backup_predict(&vals);
        prop_assert!((0.0..=1.0 + EPS).contains(&v));
        prop_assert!((0.0..=1.0).contains(&backup_split(&children, penalty)));
    }

    #[test]
    fn predict_is_zero_exactly_when_everyone_waits(
        agents in prop::collection::vec((unit(), 0.05f64..=1.0), 1..4),
    ) {
        let vals: Vec<DecisionValue> = agents.iter().map(|&(p, e)| dv(p, if p == 1.0 { 0.0 } else { e })).collect();
        let all_wait = vals.iter().all(|d| d.p_noop == 1.0);
        prop_assert_eq!(backup_predict(&vals) == 0.0, all_wait);
    }

    #[test]
    fn single_agent_reduces_to_min_and_expectation(
        acts in prop::collection::vec((unit(), unit()), 1..5),
        children in prop::collection::vec(unit(), 1..5),
    ) {
        let scores: Vec<ActionScore> = acts.iter().map(|&(sc, oc)| score(ActionKind::Execute, sc, oc)).collect();
        let d = decision_value(&scores);
        let best = acts.iter().map(|a| a.0).fold(0.0, f64::max);
        let tied: Vec<f64> = acts.iter().filter(|a| best > 0.0 && a.0 >= best - TIE).map(|a| a.1).collect();
        let mean = if tied.is_empty() { 0.0 } else { tied.iter().sum::<f64>() / tied.len() as f64 };
        let predict = backup_predict(&[d]);
        prop_assert!((predict - mean).abs() < 1e-9);
        let min = children.iter().copied().fold(1.0, f64::min);
        prop_assert!((backup_split(&children, 1.0) - min).abs() < EPS);
    }
}
