//! State variables carried between batches: exact frequency tables and the
//! entropy caches derived from them, plus the from-scratch builder.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::relation::{Batch, Dictionary, Schema, ValueId};

/// Logarithm base shared by every cached entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBase {
    base: f64,
    ln_base: f64,
}

impl LogBase {
    pub const BITS: f64 = 2.0;

    pub fn new(base: f64) -> Result<Self> {
        if !base.is_finite() || base <= 0.0 || base == 1.0 {
            return Err(Error::InvalidLogBase(base));
        }
        Ok(Self {
            base,
            ln_base: base.ln(),
        })
    }

    pub fn bits() -> Self {
        Self::new(Self::BITS).expect("2 is a valid base")
    }

    pub fn value(&self) -> f64 {
        self.base
    }

    #[inline]
    pub fn log(&self, x: f64) -> f64 {
        x.ln() / self.ln_base
    }

    /// `log_b(1 + x)`, accurate for small `x`.
    #[inline]
    pub fn log_1p(&self, x: f64) -> f64 {
        x.ln_1p() / self.ln_base
    }
}

/// Shannon entropy `-Σ (c/total)·log_b(c/total)` of a count vector.
///
/// Zero counts are skipped. Summation follows slice order.
pub fn entropy_from_counts(counts: &[u64], total: u64, log_base: f64) -> Result<f64> {
    let base = LogBase::new(log_base)?;
    if total == 0 {
        return Err(Error::ZeroTotal);
    }
    Ok(entropy_of(counts.iter().copied(), total, &base))
}

#[inline]
pub(crate) fn entropy_of(counts: impl IntoIterator<Item = u64>, total: u64, base: &LogBase) -> f64 {
    let total = total as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * base.log(p);
        }
    }
    h
}

/// Index of the unordered pair `{i, j}`, `i < j`, in row-major upper-triangle order.
#[inline]
pub(crate) fn pair_index(arity: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < arity);
    i * (2 * arity - i - 1) / 2 + (j - i - 1)
}

/// All unordered attribute pairs `(i, j)` with `i < j`, in pair-index order.
pub fn attribute_pairs(arity: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..arity).flat_map(move |i| (i + 1..arity).map(move |j| (i, j)))
}

/// Sparse joint counts for one attribute pair `{i, j}`, `i < j`, keyed
/// `(value of i, value of j)`. Only nonzero cells are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JointTable {
    pub(crate) cells: BTreeMap<(ValueId, ValueId), u64>,
}

impl JointTable {
    pub fn get(&self, lo: ValueId, hi: ValueId) -> u64 {
        self.cells.get(&(lo, hi)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ValueId, ValueId, u64)> + '_ {
        self.cells.iter().map(|(&(x, y), &c)| (x, y, c))
    }

    pub(crate) fn add(&mut self, lo: ValueId, hi: ValueId, count: u64) {
        *self.cells.entry((lo, hi)).or_insert(0) += count;
    }
}

/// Tuple count, marginal tables `f_i` and joint tables `f_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyState {
    pub(crate) n: u64,
    /// `marginals[i][x]` = f_i(x); indexed by value id.
    pub(crate) marginals: Vec<Vec<u64>>,
    /// One table per unordered pair, in [`attribute_pairs`] order.
    pub(crate) joints: Vec<JointTable>,
}

impl FrequencyState {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn arity(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginal(&self, attr: usize) -> &[u64] {
        &self.marginals[attr]
    }

    pub fn marginal_count(&self, attr: usize, x: ValueId) -> u64 {
        self.marginals[attr].get(x.index()).copied().unwrap_or(0)
    }

    /// The stored table for `{i, j}`; `i < j` required.
    pub fn joint_table(&self, i: usize, j: usize) -> &JointTable {
        &self.joints[pair_index(self.arity(), i, j)]
    }

    /// f_ij(x, y) for any ordered pair `i != j`.
    pub fn joint(&self, i: usize, x: ValueId, j: usize, y: ValueId) -> u64 {
        if i < j {
            self.joint_table(i, j).get(x, y)
        } else {
            self.joint_table(j, i).get(y, x)
        }
    }

    /// Nonzero counts of `A_i` among tuples with `A_j = y`, ascending in x.
    pub fn column(&self, i: usize, j: usize, y: ValueId) -> Vec<(ValueId, u64)> {
        if i < j {
            self.joint_table(i, j)
                .iter()
                .filter(|&(_, yy, _)| yy == y)
                .map(|(x, _, c)| (x, c))
                .collect()
        } else {
            self.joint_table(j, i)
                .cells
                .range((y, ValueId(0))..=(y, ValueId(u32::MAX)))
                .map(|(&(_, x), &c)| (x, c))
                .collect()
        }
    }

    /// Checks the marginal/joint summation identities. Returns a description
    /// of the first violation.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let arity = self.arity();
        for (i, m) in self.marginals.iter().enumerate() {
            if let Some(x) = m.iter().position(|&c| c == 0) {
                return Err(format!("marginal count of attribute {i} value {x} is zero"));
            }
            let sum: u64 = m.iter().sum();
            if sum != self.n {
                return Err(format!(
                    "marginals of attribute {i} sum to {sum}, n = {}",
                    self.n
                ));
            }
        }
        for (i, j) in attribute_pairs(arity) {
            let table = self.joint_table(i, j);
            let mut row = vec![0u64; self.marginals[i].len()];
            let mut col = vec![0u64; self.marginals[j].len()];
            for (x, y, c) in table.iter() {
                if c == 0 {
                    return Err(format!("joint ({i},{j}) stores a zero cell ({x},{y})"));
                }
                match (row.get_mut(x.index()), col.get_mut(y.index())) {
                    (Some(r), Some(k)) => {
                        *r += c;
                        *k += c;
                    }
                    _ => return Err(format!("joint ({i},{j}) cell ({x},{y}) is out of domain")),
                }
            }
            if let Some(x) = (0..row.len()).find(|&x| row[x] != self.marginals[i][x]) {
                return Err(format!("joint ({i},{j}) row {x} does not sum to f_{i}"));
            }
            if let Some(y) = (0..col.len()).find(|&y| col[y] != self.marginals[j][y]) {
                return Err(format!("joint ({i},{j}) column {y} does not sum to f_{j}"));
            }
        }
        Ok(())
    }
}

/// Cached marginal entropies `H(A_i)` and conditional entropies `H(A_i | A_j = y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCache {
    pub(crate) marginal: Vec<f64>,
    /// `conditional[i * arity + j][y]`; empty when `i == j`.
    pub(crate) conditional: Vec<Vec<f64>>,
}

impl EntropyCache {
    pub fn arity(&self) -> usize {
        self.marginal.len()
    }

    pub fn marginal(&self, attr: usize) -> f64 {
        self.marginal[attr]
    }

    pub fn conditional(&self, i: usize, j: usize, y: ValueId) -> Option<f64> {
        self.conditional_column(i, j).get(y.index()).copied()
    }

    /// All cached `H(A_i | A_j = y)`, indexed by y.
    pub fn conditional_column(&self, i: usize, j: usize) -> &[f64] {
        &self.conditional[i * self.arity() + j]
    }
}

/// Everything maintained between batches.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningState {
    pub(crate) schema: Schema,
    pub(crate) dictionary: Dictionary,
    pub(crate) freq: FrequencyState,
    pub(crate) entropy: EntropyCache,
    pub(crate) log_base: LogBase,
    pub(crate) batch_count: u64,
}

impl MiningState {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Mutable dictionary access for encoding the next batch.
    pub fn dictionary_mut(&mut self) -> &mut Dictionary {
        &mut self.dictionary
    }

    pub fn frequencies(&self) -> &FrequencyState {
        &self.freq
    }

    pub fn entropies(&self) -> &EntropyCache {
        &self.entropy
    }

    pub fn log_base(&self) -> LogBase {
        self.log_base
    }

    pub fn n(&self) -> u64 {
        self.freq.n
    }

    pub fn arity(&self) -> usize {
        self.schema.arity()
    }

    /// Number of batches applied, counting the initial one.
    pub fn batch_count(&self) -> u64 {
        self.batch_count
    }

    /// Encodes string rows against this state's dictionary.
    pub fn encode<R, S>(&mut self, rows: &[R], null_token: &str) -> Result<Batch>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        crate::relation::encode_batch_with(&self.schema, &mut self.dictionary, rows, null_token)
    }

    pub fn marginal_entropy(&self, attr: usize) -> f64 {
        self.entropy.marginal(attr)
    }

    pub fn conditional_entropy(&self, i: usize, j: usize, y: ValueId) -> Option<f64> {
        self.entropy.conditional(i, j, y)
    }
}

/// Builds the full state from one batch (InitStates).
pub fn init_states(
    batch: &Batch,
    schema: Schema,
    dict: Dictionary,
    log_base: f64,
) -> Result<MiningState> {
    let base = LogBase::new(log_base)?;
    build_state(batch.columns(), schema, dict, base, 1)
}

/// Scratch construction over encoded columns; shared by `init_states` and
/// the overhaul recomputation.
pub(crate) fn build_state<C: AsRef<[ValueId]>>(
    columns: &[C],
    schema: Schema,
    dict: Dictionary,
    log_base: LogBase,
    batch_count: u64,
) -> Result<MiningState> {
    let arity = schema.arity();
    if columns.len() != arity || dict.arity() != arity {
        return Err(Error::SchemaMismatch(format!(
            "schema has {arity} attributes, data has {} and dictionary {}",
            columns.len(),
            dict.arity()
        )));
    }
    let columns: Vec<&[ValueId]> = columns.iter().map(AsRef::as_ref).collect();
    let rows = columns[0].len();
    if rows == 0 {
        return Err(Error::EmptyBatch);
    }
    for (attr, col) in columns.iter().enumerate() {
        let dom = dict.domain_size(attr);
        if col.len() != rows {
            return Err(Error::InvalidBatch(format!("column {attr} is ragged")));
        }
        if let Some(v) = col.iter().find(|v| v.index() >= dom) {
            return Err(Error::UnknownValue { attr, value: v.0 });
        }
    }

    let marginals: Vec<Vec<u64>> = columns
        .iter()
        .enumerate()
        .map(|(attr, col)| {
            let mut counts = vec![0u64; dict.domain_size(attr)];
            for v in col.iter() {
                counts[v.index()] += 1;
            }
            counts
        })
        .collect();
    if let Some((attr, x)) = marginals
        .iter()
        .enumerate()
        .find_map(|(a, m)| m.iter().position(|&c| c == 0).map(|x| (a, x)))
    {
        return Err(Error::InvalidBatch(format!(
            "dictionary value {x} of attribute {attr} never occurs in the data"
        )));
    }

    let joints: Vec<JointTable> = attribute_pairs(arity)
        .map(|(i, j)| {
            count_pairs(
                columns[i],
                columns[j],
                marginals[i].len(),
                marginals[j].len(),
            )
        })
        .collect();

    let freq = FrequencyState {
        n: rows as u64,
        marginals,
        joints,
    };
    let entropy = entropies_from_scratch(&freq, &log_base);
    Ok(MiningState {
        schema,
        dictionary: dict,
        freq,
        entropy,
        log_base,
        batch_count,
    })
}

const DENSE_PAIR_LIMIT: usize = 1 << 22;

fn count_pairs(lo: &[ValueId], hi: &[ValueId], lo_dom: usize, hi_dom: usize) -> JointTable {
    let mut table = JointTable::default();
    if lo_dom.saturating_mul(hi_dom) <= DENSE_PAIR_LIMIT {
        let mut dense = vec![0u64; lo_dom * hi_dom];
        for (x, y) in lo.iter().zip(hi) {
            dense[x.index() * hi_dom + y.index()] += 1;
        }
        for (k, &c) in dense.iter().enumerate().filter(|(_, &c)| c > 0) {
            let x = ValueId((k / hi_dom) as u32);
            let y = ValueId((k % hi_dom) as u32);
            table.cells.insert((x, y), c);
        }
    } else {
        for (&x, &y) in lo.iter().zip(hi) {
            table.add(x, y, 1);
        }
    }
    table
}

fn entropies_from_scratch(freq: &FrequencyState, base: &LogBase) -> EntropyCache {
    let arity = freq.arity();
    let marginal = freq
        .marginals
        .iter()
        .map(|m| entropy_of(m.iter().copied(), freq.n, base))
        .collect();
    let mut conditional = vec![Vec::new(); arity * arity];
    for (i, j) in attribute_pairs(arity) {
        let table = freq.joint_table(i, j);
        // Target i given j = y: gather each y's column; cells arrive in
        // ascending x, so each column is in ascending value-id order.
        let mut by_hi: Vec<Vec<u64>> = vec![Vec::new(); freq.marginals[j].len()];
        // Target j given i = x: rows are contiguous runs in key order.
        let mut by_lo: Vec<Vec<u64>> = vec![Vec::new(); freq.marginals[i].len()];
        for (x, y, c) in table.iter() {
            by_hi[y.index()].push(c);
            by_lo[x.index()].push(c);
        }
        conditional[i * arity + j] = by_hi
            .iter()
            .zip(&freq.marginals[j])
            .map(|(col, &total)| entropy_of(col.iter().copied(), total, base))
            .collect();
        conditional[j * arity + i] = by_lo
            .iter()
            .zip(&freq.marginals[i])
            .map(|(row, &total)| entropy_of(row.iter().copied(), total, base))
            .collect();
    }
    EntropyCache {
        marginal,
        conditional,
    }
}

/// Values x of `A_i` with f_ij(x, y) > 0, ascending.
pub fn conditional_support(
    state: &MiningState,
    i: usize,
    j: usize,
    y: ValueId,
) -> Result<Vec<ValueId>> {
    if i == j {
        return Err(Error::SameAttribute(i));
    }
    let arity = state.arity();
    if i >= arity || j >= arity {
        return Err(Error::UnknownAttribute(format!("#{}", i.max(j))));
    }
    if state.freq.marginal_count(j, y) == 0 {
        return Err(Error::UnknownValue {
            attr: j,
            value: y.0,
        });
    }
    Ok(state
        .freq
        .column(i, j, y)
        .into_iter()
        .map(|(x, _)| x)
        .collect())
}
