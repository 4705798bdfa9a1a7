use epike_core::kb::Backtracking;
use epike_harness::generator::{generate, GenerateError, TaskParams};
use epike_harness::scenario::Scenario;
use proptest::prelude::*;

#[test]
fn bad_parameters_are_rejected() {
    let p = TaskParams {
        diff: 4,
        ..TaskParams::default()
    };
    assert!(matches!(generate(&p), Err(GenerateError::DiffTooLarge { .. })));
    let p = TaskParams {
        num_orders: 3,
        ..TaskParams::default()
    };
    assert!(matches!(generate(&p), Err(GenerateError::TooManyOrders { .. })));
    let p = TaskParams {
        domain_size: 1,
        ..TaskParams::default()
    };
    assert_eq!(generate(&p), Err(GenerateError::TooSmall));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generated_tasks_are_solvable_and_reproducible(seed in 0u64..10_000, diff in 0usize..=3) {
        let p = TaskParams { diff, seed, ..TaskParams::default() };
        let file = generate(&p).unwrap();
        prop_assert_eq!(&file, &generate(&p).unwrap());
        prop_assert_eq!(file.worlds.len(), 1 << diff);
        let s = Scenario::from_file(file).unwrap();
        prop_assert!(!s.lib.feasible_subplans(s.ground()).is_empty());
        prop_assert!(!s.lib.success_holds(s.ground(), &Backtracking));
        // Every world of the second agent's view is a consistent task too.
        let y = s.agent("Y").unwrap();
        prop_assert_eq!(s.views[y.index()].designated().len(), 1 << diff);
    }
}
