#![allow(dead_code)]

use std::collections::HashMap;

use igmine::{encode_batch, init_states, Dictionary, MiningState, Schema, ValueId};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Entropy straight from the definition over raw string rows, independent of
/// the engine's tables and summation order.
pub fn naive_entropy<'a>(values: impl Iterator<Item = &'a str>, base: f64) -> f64 {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut total = 0u64;
    for v in values {
        *counts.entry(v).or_default() += 1;
        total += 1;
    }
    let mut h = 0.0;
    for &c in counts.values() {
        let p = c as f64 / total as f64;
        h -= p * p.log(base);
    }
    h
}

pub fn naive_marginal(rows: &[Vec<String>], i: usize, base: f64) -> f64 {
    naive_entropy(rows.iter().map(|r| r[i].as_str()), base)
}

pub fn naive_conditional(rows: &[Vec<String>], i: usize, j: usize, y: &str, base: f64) -> f64 {
    naive_entropy(
        rows.iter().filter(|r| r[j] == y).map(|r| r[i].as_str()),
        base,
    )
}

pub fn naive_count(rows: &[Vec<String>], i: usize, x: &str) -> u64 {
    rows.iter().filter(|r| r[i] == x).count() as u64
}

/// Checks every count and cached entropy of `state` against the rows.
pub fn assert_matches_naive(state: &MiningState, rows: &[Vec<String>], tol: f64) {
    let base = state.log_base().value();
    let arity = state.arity();
    let dict = state.dictionary();
    assert_eq!(state.n(), rows.len() as u64);

    let mut joint: HashMap<(usize, &str, usize, &str), u64> = HashMap::new();
    let mut columns: HashMap<(usize, usize, &str), Vec<&str>> = HashMap::new();
    for r in rows {
        for i in 0..arity {
            for j in (0..arity).filter(|&j| j != i) {
                *joint
                    .entry((i, r[i].as_str(), j, r[j].as_str()))
                    .or_default() += 1;
                columns
                    .entry((i, j, r[j].as_str()))
                    .or_default()
                    .push(r[i].as_str());
            }
        }
    }

    for i in 0..arity {
        let h = naive_marginal(rows, i, base);
        assert!(
            (state.marginal_entropy(i) - h).abs() <= tol,
            "H(A{i}) {} vs {h}",
            state.marginal_entropy(i)
        );
        for (k, x) in dict.values(i).iter().enumerate() {
            assert_eq!(state.frequencies().marginal(i)[k], naive_count(rows, i, x));
        }
        for j in (0..arity).filter(|&j| j != i) {
            for (k, y) in dict.values(j).iter().enumerate() {
                let h = naive_entropy(columns[&(i, j, y.as_str())].iter().copied(), base);
                let got = state.conditional_entropy(i, j, ValueId(k as u32)).unwrap();
                assert!((got - h).abs() <= tol, "H(A{i}|A{j}={y}) {got} vs {h}");
            }
            let mut stored = 0;
            for (a, x) in dict.values(i).iter().enumerate() {
                for (b, y) in dict.values(j).iter().enumerate() {
                    let want = joint
                        .get(&(i, x.as_str(), j, y.as_str()))
                        .copied()
                        .unwrap_or(0);
                    let got = state
                        .frequencies()
                        .joint(i, ValueId(a as u32), j, ValueId(b as u32));
                    assert_eq!(got, want, "f(A{i}={x}, A{j}={y})");
                    stored += (got > 0) as usize;
                }
            }
            if i < j {
                assert_eq!(state.frequencies().joint_table(i, j).len(), stored);
            }
        }
    }
}

/// Random row streams with skewed value frequencies.
pub struct StreamGen {
    rng: ChaCha8Rng,
    pub cards: Vec<u32>,
}

impl StreamGen {
    pub fn new(seed: u64, arity: usize, max_card: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cards = (0..arity)
            .map(|_| 1 + (rng.next_u32() % max_card))
            .collect();
        Self { rng, cards }
    }

    fn below(&mut self, n: u32) -> u32 {
        self.rng.next_u32() % n
    }

    pub fn rows(&mut self, count: usize) -> Vec<Vec<String>> {
        (0..count)
            .map(|_| {
                let cards = self.cards.clone();
                cards
                    .iter()
                    .map(|&c| {
                        // min of two draws skews towards small ids
                        let v = self.below(c).min(self.below(c));
                        format!("v{v}")
                    })
                    .collect()
            })
            .collect()
    }

    pub fn batch_size(&mut self, lo: u32, hi: u32) -> usize {
        (lo + self.below(hi - lo + 1)) as usize
    }
}

pub fn strings(rows: &[Vec<u8>]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(|v| format!("v{v}")).collect())
        .collect()
}

pub fn schema(arity: usize) -> Schema {
    Schema::new((0..arity).map(|k| format!("A{k}"))).unwrap()
}

pub fn init(rows: &[Vec<String>], arity: usize) -> MiningState {
    let schema = schema(arity);
    let mut dict = Dictionary::new(arity);
    let batch = encode_batch(&schema, &mut dict, rows).unwrap();
    init_states(&batch, schema, dict, 2.0).unwrap()
}

pub fn demo_rows() -> Vec<Vec<String>> {
    [["a", "y"], ["a", "y"], ["b", "y"], ["b", "z"]]
        .iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect()
}

pub fn demo_state() -> MiningState {
    let schema = Schema::new(["A", "B"]).unwrap();
    let mut dict = Dictionary::new(2);
    let batch = encode_batch(&schema, &mut dict, &demo_rows()).unwrap();
    init_states(&batch, schema, dict, 2.0).unwrap()
}
