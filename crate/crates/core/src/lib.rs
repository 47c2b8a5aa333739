//! Incremental information gain mining over append-only categorical
//! relations.
//!
//! A [`MiningState`] holds exact marginal and pairwise joint frequency
//! tables together with cached marginal entropies `H(A_i)` and per-value
//! conditional entropies `H(A_i | A_j = y)`. Appending a batch with
//! [`update_states`] touches only the cells the batch contains, so its cost
//! depends on the batch size and not on how many tuples came before. The
//! information gain of a cell is `H(A_i) − H(A_i | A_j = y)`.
//!
//! ```
//! use igmine::{encode_batch, init_states, update_states, information_gain, Dictionary, Schema};
//!
//! let schema = Schema::new(["A", "B"]).unwrap();
//! let mut dict = Dictionary::new(2);
//! let rows = [["a", "y"], ["a", "y"], ["b", "y"], ["b", "z"]];
//! let batch = encode_batch(&schema, &mut dict, &rows).unwrap();
//! let mut state = init_states(&batch, schema, dict, 2.0).unwrap();
//!
//! let z = state.dictionary().lookup(1, "z").unwrap();
//! assert!((information_gain(&state, 0, 1, z).unwrap() - 1.0).abs() < 1e-12);
//!
//! let more = state.encode(&[["b", "y"]], "__NULL__").unwrap();
//! update_states(&mut state, &more).unwrap();
//! assert_eq!(state.n(), 5);
//! ```

pub mod engine;
pub mod error;
pub mod harness;
pub mod incremental;
pub mod ingest;
pub mod mining;
pub mod oracle;
pub mod relation;
pub mod snapshot;
pub mod state;
pub mod synth;

pub use engine::{Engine, EngineOptions};
pub use error::{Error, Result};
pub use incremental::{
    extract_delta, update_conditional_entropy, update_marginal_entropy, update_states, CellDelta,
    DeltaCounts, UpdateReport, ValueDelta,
};
pub use mining::{
    band_thresholds, heatmap_bands, information_gain, mutual_information, top_k, Band, IgCell,
};
pub use oracle::{compare_states, rebuild, recompute_states, DriftReport};
pub use relation::{
    encode_batch, encode_batch_with, intern_value, Batch, Dictionary, Relation, Schema, ValueId,
    DEFAULT_NULL_TOKEN,
};
pub use state::{
    attribute_pairs, conditional_support, entropy_from_counts, init_states, EntropyCache,
    FrequencyState, JointTable, LogBase, MiningState,
};
