//! Hand-checkable fixtures. Expected values were produced with the naive
//! definition-level entropy in `common` and frozen here.

mod common;

use common::*;
use igmine::{information_gain, mutual_information, top_k, update_states, ValueId};

const H_A: f64 = 1.0;
const H_B: f64 = 0.811_278_124_459_132_8;
const H_A_GIVEN_Y: f64 = 0.918_295_834_054_489_6;
const MI_AB: f64 = 0.311_278_124_459_132_8;
const H_A_AFTER: f64 = 0.970_950_594_454_668_5;

#[test]
fn frozen_values_agree_with_naive_oracle() {
    let rows = demo_rows();
    assert!((naive_marginal(&rows, 0, 2.0) - H_A).abs() < 1e-15);
    assert!((naive_marginal(&rows, 1, 2.0) - H_B).abs() < 1e-15);
    assert!((naive_conditional(&rows, 0, 1, "y", 2.0) - H_A_GIVEN_Y).abs() < 1e-15);
    assert_eq!(naive_conditional(&rows, 0, 1, "z", 2.0), 0.0);
    let mi = 0.75 * (H_A - H_A_GIVEN_Y) + 0.25 * H_A;
    assert!((mi - MI_AB).abs() < 1e-15);

    let mut after = rows.clone();
    after.push(vec!["b".into(), "y".into()]);
    assert!((naive_marginal(&after, 0, 2.0) - H_A_AFTER).abs() < 1e-15);
    assert!((naive_conditional(&after, 0, 1, "y", 2.0) - 1.0).abs() < 1e-15);
}

#[test]
fn init_fixture() {
    let s = demo_state();
    assert_matches_naive(&s, &demo_rows(), 1e-12);
    let (y, z) = (ValueId(0), ValueId(1));
    assert!((s.marginal_entropy(0) - H_A).abs() < 1e-7);
    assert!((s.marginal_entropy(1) - H_B).abs() < 1e-7);
    assert!((s.conditional_entropy(0, 1, y).unwrap() - H_A_GIVEN_Y).abs() < 1e-7);
    assert_eq!(s.conditional_entropy(0, 1, z), Some(0.0));
    assert!((information_gain(&s, 0, 1, z).unwrap() - 1.0).abs() < 1e-7);
    assert!((mutual_information(&s, 0, 1).unwrap() - MI_AB).abs() < 1e-7);
    let top = top_k(&s, Some(0), 1).unwrap();
    assert_eq!((top[0].cond_attr, top[0].cond_value), (1, z));
}

#[test]
fn append_fixture_uses_case_three() {
    let mut s = demo_state();
    let y = ValueId(0);
    let prior = s.frequencies().marginal_count(1, y);
    assert!(prior > 0);
    let batch = s.encode(&[["b", "y"]], "__NULL__").unwrap();
    let report = update_states(&mut s, &batch).unwrap();
    assert_eq!(report.new_values, 0);
    assert_eq!(s.n(), 5);
    assert!((s.marginal_entropy(0) - H_A_AFTER).abs() < 1e-7);
    assert!((s.conditional_entropy(0, 1, y).unwrap() - 1.0).abs() < 1e-7);
    assert_eq!(s.conditional_entropy(0, 1, ValueId(1)), Some(0.0));

    let mut rows = demo_rows();
    rows.push(vec!["b".into(), "y".into()]);
    assert_matches_naive(&s, &rows, 1e-12);
}

#[test]
fn independent_and_functional_columns() {
    // Product distribution.
    let rows: Vec<Vec<String>> = (0..12)
        .map(|k| vec![format!("a{}", k % 3), format!("b{}", k / 3 % 4)])
        .collect();
    let s = init(&rows, 2);
    assert!(mutual_information(&s, 0, 1).unwrap().abs() < 1e-9);

    // A0 is a function of A1.
    let rows: Vec<Vec<String>> = (0..20)
        .map(|k| vec![format!("a{}", (k % 5) / 2), format!("b{}", k % 5)])
        .collect();
    let s = init(&rows, 2);
    let mi = mutual_information(&s, 0, 1).unwrap();
    assert!((mi - s.marginal_entropy(0)).abs() < 1e-9);
}
