//! Randomized equivalence of the incremental path against scratch
//! recomputation and the definition-level oracle.

mod common;

use common::*;
use igmine::mining::cells;
use igmine::{
    compare_states, mutual_information, recompute_states, snapshot, top_k, update_states,
    MiningState, Relation, ValueId,
};
use proptest::prelude::*;

fn check_information_invariants(s: &MiningState) {
    let arity = s.arity();
    let tol = 1e-9;
    for i in 0..arity {
        let dom = s.frequencies().marginal(i).len() as f64;
        let h = s.marginal_entropy(i);
        assert!(h >= -tol && h <= dom.log2() + tol, "H(A{i}) = {h}");
        for j in (0..arity).filter(|&j| j != i) {
            for (y, &hc) in s.entropies().conditional_column(i, j).iter().enumerate() {
                let support = s.frequencies().column(i, j, ValueId(y as u32)).len() as f64;
                assert!(
                    hc >= -tol && hc <= support.log2() + tol,
                    "H(A{i}|A{j}={y}) = {hc}"
                );
            }
            let mi = mutual_information(s, i, j).unwrap();
            let mi_rev = mutual_information(s, j, i).unwrap();
            assert!(mi >= -tol, "MI({i},{j}) = {mi}");
            assert!((mi - mi_rev).abs() <= tol);
        }
    }
    for c in cells(s, None).unwrap() {
        assert!(c.ig <= s.marginal_entropy(c.target) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn init_matches_definition(seed in any::<u64>(), arity in 2usize..=10, rows in 1usize..=2000) {
        let mut gen = StreamGen::new(seed, arity, 30);
        let data = gen.rows(rows);
        let s = init(&data, arity);
        assert_matches_naive(&s, &data, 1e-12);
        prop_assert!(s.frequencies().check_consistency().is_ok());

        // Scratch recompute over the same tuples is the same state.
        let mut rel = Relation::new();
        let mut dict = s.dictionary().clone();
        rel.push(&igmine::encode_batch(s.schema(), &mut dict, &data).unwrap()).unwrap();
        let again = recompute_states(&rel, s.schema().clone(), dict, 2.0).unwrap();
        prop_assert_eq!(&again, &s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn incremental_matches_recompute_after_every_batch(
        seed in any::<u64>(),
        arity in 2usize..=8,
        batches in 30usize..=100,
    ) {
        let mut gen = StreamGen::new(seed, arity, 25);
        let size = gen.batch_size(1, 200);
        let first = gen.rows(size);
        let mut state = init(&first, arity);
        let mut rel = Relation::new();
        let mut dict = state.dictionary().clone();
        rel.push(&igmine::encode_batch(state.schema(), &mut dict, &first).unwrap()).unwrap();

        for _ in 0..batches {
            let size = gen.batch_size(1, 200);
            let rows = gen.rows(size);
            let untouched = state.clone();
            let batch = state.encode(&rows, "__NULL__").unwrap();
            rel.push(&batch).unwrap();
            let report = update_states(&mut state, &batch).unwrap();

            // Efficiency: bounded by the batch, not the relation.
            let bound = 16 * (size * arity * arity) as u64;
            prop_assert!(report.touches <= bound, "{} > {}", report.touches, bound);

            // Columns the batch did not touch keep their exact bits.
            for i in 0..arity {
                for j in (0..arity).filter(|&j| j != i) {
                    let before = untouched.entropies().conditional_column(i, j);
                    let after = state.entropies().conditional_column(i, j);
                    for y in 0..before.len() {
                        if !batch.column(j).contains(&ValueId(y as u32)) {
                            prop_assert_eq!(before[y].to_bits(), after[y].to_bits());
                        }
                    }
                }
            }

            let scratch =
                recompute_states(&rel, state.schema().clone(), state.dictionary().clone(), 2.0)
                    .unwrap();
            let drift = compare_states(&state, &scratch, 1e-9).unwrap();
            prop_assert!(drift.passed(), "{}", drift);
        }
        check_information_invariants(&state);
    }

    #[test]
    fn splitting_a_batch_changes_nothing(seed in any::<u64>(), arity in 2usize..=6, cut in 1usize..150) {
        let mut gen = StreamGen::new(seed, arity, 12);
        let first = gen.rows(50);
        let extra = gen.rows(150);
        let base = init(&first, arity);

        let mut whole = base.clone();
        let b = whole.encode(&extra, "__NULL__").unwrap();
        update_states(&mut whole, &b).unwrap();

        let mut split = base.clone();
        let b1 = split.encode(&extra[..cut], "__NULL__").unwrap();
        update_states(&mut split, &b1).unwrap();
        let b2 = split.encode(&extra[cut..], "__NULL__").unwrap();
        update_states(&mut split, &b2).unwrap();

        prop_assert_eq!(whole.frequencies(), split.frequencies());
        prop_assert_eq!(whole.dictionary(), split.dictionary());
        let drift = compare_states(&whole, &split, 1e-9).unwrap();
        prop_assert!(drift.passed(), "{}", drift);
    }

    #[test]
    fn top_k_is_prefix_of_full_ranking(seed in any::<u64>(), k in 1usize..40) {
        let mut gen = StreamGen::new(seed, 4, 6);
        let s = init(&gen.rows(300), 4);
        let full = top_k(&s, None, usize::MAX).unwrap();
        let head = top_k(&s, None, k).unwrap();
        prop_assert_eq!(&full[..head.len()], &head[..]);
        prop_assert!(full.windows(2).all(|w| w[0].ig >= w[1].ig));
    }

    #[test]
    fn snapshot_round_trip_mid_stream(seed in any::<u64>()) {
        let mut gen = StreamGen::new(seed, 4, 10);
        let mut s = init(&gen.rows(100), 4);
        let b = s.encode(&gen.rows(40), "__NULL__").unwrap();
        update_states(&mut s, &b).unwrap();

        let text = snapshot::to_string(&s).unwrap();
        let mut loaded = snapshot::from_str(&text).unwrap();
        prop_assert!(compare_states(&s, &loaded, 0.0).unwrap().passed());
        prop_assert_eq!(snapshot::to_string(&loaded).unwrap(), text);

        // Continuing after the reload matches continuing without it.
        let more = gen.rows(60);
        let b1 = s.encode(&more, "__NULL__").unwrap();
        update_states(&mut s, &b1).unwrap();
        let b2 = loaded.encode(&more, "__NULL__").unwrap();
        update_states(&mut loaded, &b2).unwrap();
        prop_assert_eq!(&s, &loaded);
    }
}
