//! Shared fixtures for the criterion benchmarks.

use igmine::harness::default_attributes;
use igmine::synth::{GenConfig, Generator};
use igmine::{encode_batch, init_states, Batch, Dictionary, MiningState, Relation, Schema};

/// A state over `rows` synthetic tuples plus a row source for further batches.
pub fn fixture(seed: u64, rows: usize) -> (MiningState, Relation, Generator) {
    let mut gen = Generator::new(GenConfig {
        seed,
        rows: u64::MAX,
        attributes: default_attributes(),
        planted: Vec::new(),
    })
    .expect("default attributes are valid");
    let schema = Schema::new(gen.header()).expect("valid schema");
    let mut dict = Dictionary::new(schema.arity());
    let batch = encode_batch(&schema, &mut dict, &gen.take_rows(rows)).expect("non-empty");
    let mut relation = Relation::new();
    relation.push(&batch).expect("same arity");
    let state = init_states(&batch, schema, dict, 2.0).expect("valid state");
    (state, relation, gen)
}

/// Encodes the next `size` generated rows against `state`.
pub fn next_batch(state: &mut MiningState, gen: &mut Generator, size: usize) -> Batch {
    let rows = gen.take_rows(size);
    state
        .encode(&rows, igmine::DEFAULT_NULL_TOKEN)
        .expect("non-empty batch")
}
