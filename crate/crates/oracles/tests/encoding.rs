use epike_oracles::encoding::check;

#[test]
fn encoding_matches_enumeration() {
    let r = check(240, 0x5eed);
    assert!(r.mismatches.is_empty(), "{:#?}", r.mismatches);
    // The generator must exercise both outcomes.
    assert!(r.consistent > 60 && r.consistent < 235, "{}", r.consistent);
    assert!(r.successes > 10, "{}", r.successes);
    assert!(r.cyclic > 5, "{}", r.cyclic);
}
