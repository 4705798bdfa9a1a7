use epike_harness::sim::AgentKind;
use epike_harness::suite::{run_suite, write_csv, SuiteGrid};

fn small() -> SuiteGrid {
    SuiteGrid {
        num_variables: vec![2, 3],
        num_orders: vec![1, 2],
        diff: vec![0, 1, 4],
        tasks: 3,
        reps: 2,
        iterations: 200,
        ..SuiteGrid::default()
    }
}

#[test]
fn invalid_conditions_are_skipped() {
    let g = small();
    let conds = g.conditions();
    // v=2 admits one ordering link; diff 4 exceeds the three constraints.
    assert_eq!(conds.len(), 2 + 2 * 2);
    assert!(conds.iter().all(|p| p.num_orders < p.num_variables && p.diff <= p.num_constraints));
}

#[test]
fn rates_sum_to_one_and_rows_reproduce() {
    let g = small();
    let mut seen = 0;
    let rows = run_suite(&g, |_| seen += 1).unwrap();
    assert_eq!(rows.len(), seen);
    assert_eq!(rows.len(), g.conditions().len() * 2);
    for r in &rows {
        assert_eq!(r.success + r.failure + r.hang, r.runs);
        assert_eq!(r.runs, (g.tasks - r.skipped) * g.reps);
        if r.runs > 0 {
            assert!((r.success_rate + r.failure_rate + r.hang_rate - 1.0).abs() < 1e-12);
        }
    }
    let again = run_suite(&g, |_| {}).unwrap();
    let outcome = |rs: &[epike_harness::suite::SuiteRow]| rs.iter().map(|r| (r.success, r.failure, r.hang)).collect::<Vec<_>>();
    assert_eq!(outcome(&rows), outcome(&again));

    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("agents,num_variables,num_orders,num_constraints,diff,runs,success,failure,hang"));
    assert!(header.ends_with("mean_callback_ms"));
    assert_eq!(text.lines().count(), rows.len() + 1);
}

#[test]
fn grids_parse_with_defaults() {
    let g: SuiteGrid = serde_json::from_str(r#"{"tasks": 40, "agents": ["pike"]}"#).unwrap();
    assert_eq!(g.tasks, 40);
    assert_eq!(g.agents, [AgentKind::Pike]);
    assert_eq!(g.diff, [0, 1, 2, 3]);
}
