//! Incremental maintenance (UpdateStates): merges one appended batch into the
//! state in time proportional to the batch, never to the relation size.
//!
//! Entropies use the standard `H = -Σ p log p` convention. For a marginal,
//! with `n` tuples before and `n'` after the append and `U` the values whose
//! count grew:
//!
//! ```text
//! H1 = (n/n')·(H + S_U) − (n/n')·log(n/n')·(1 − P_U)     untouched values
//! H2 = −Σ_{x∈U∪new} p'(x)·log p'(x)                       touched values
//! ```
//!
//! where `S_U = Σ_{x∈U} p log p` and `P_U = Σ_{x∈U} p` use pre-update
//! probabilities. Conditional entropies `H(A_i | A_j = y)` apply the same
//! split per column `y`, with `U` the x values whose joint cell `(x, y)` grew.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::relation::{Batch, ValueId};
use crate::state::{attribute_pairs, entropy_of, pair_index, LogBase, MiningState};

/// Count change of one value of one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueDelta {
    pub value: ValueId,
    /// Count before the batch; zero marks a value first seen in this batch.
    pub prior: u64,
    pub delta: u64,
}

impl ValueDelta {
    pub fn is_new(&self) -> bool {
        self.prior == 0
    }
}

/// Counts extracted from one batch, plus the updated/new partition of every
/// touched value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaCounts {
    pub rows: u64,
    /// Per attribute, touched values in ascending id order.
    pub marginals: Vec<Vec<ValueDelta>>,
    /// Per unordered pair `{i, j}`, `i < j`: Δf_ij keyed `(x_i, y_j)`.
    pub joints: Vec<BTreeMap<(ValueId, ValueId), u64>>,
}

impl DeltaCounts {
    pub fn marginal_delta(&self, attr: usize, value: ValueId) -> u64 {
        self.marginals[attr]
            .binary_search_by_key(&value, |d| d.value)
            .map_or(0, |k| self.marginals[attr][k].delta)
    }

    pub fn updated(&self, attr: usize) -> impl Iterator<Item = ValueId> + '_ {
        self.marginals[attr]
            .iter()
            .filter(|d| !d.is_new())
            .map(|d| d.value)
    }

    pub fn new_values(&self, attr: usize) -> impl Iterator<Item = ValueId> + '_ {
        self.marginals[attr]
            .iter()
            .filter(|d| d.is_new())
            .map(|d| d.value)
    }
}

/// Outcome of one `update_states` call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub rows: u64,
    /// State table cells read or written (frequency tables and entropy caches).
    pub touches: u64,
    pub new_values: u64,
    /// Conditional entropies recomputed (cases 1 and 3).
    pub conditional_updates: u64,
}

pub fn extract_delta(state: &MiningState, batch: &Batch) -> Result<DeltaCounts> {
    validate_batch(state, batch)?;
    let mut touches = 0;
    Ok(extract(state, batch, &mut touches))
}

fn validate_batch(state: &MiningState, batch: &Batch) -> Result<()> {
    let arity = state.arity();
    if batch.arity() != arity {
        return Err(Error::InvalidBatch(format!(
            "batch has {} attributes, state has {arity}",
            batch.arity()
        )));
    }
    if batch.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if state.freq.n == 0 {
        return Err(Error::InvalidDelta(
            "update applied to an empty state".into(),
        ));
    }
    for attr in 0..arity {
        let dom = state.dictionary.domain_size(attr);
        if let Some(v) = batch.column(attr).iter().find(|v| v.index() >= dom) {
            return Err(Error::UnknownValue { attr, value: v.0 });
        }
    }
    Ok(())
}

fn extract(state: &MiningState, batch: &Batch, touches: &mut u64) -> DeltaCounts {
    let arity = state.arity();
    let marginals = (0..arity)
        .map(|attr| {
            let mut counts: BTreeMap<ValueId, u64> = BTreeMap::new();
            for &v in batch.column(attr) {
                *counts.entry(v).or_insert(0) += 1;
            }
            counts
                .into_iter()
                .map(|(value, delta)| {
                    *touches += 1;
                    ValueDelta {
                        value,
                        prior: state.freq.marginal_count(attr, value),
                        delta,
                    }
                })
                .collect()
        })
        .collect();
    let rows = batch.rows();
    let mut scratch = Vec::new();
    let joints = attribute_pairs(arity)
        .map(|(i, j)| {
            let (xs, ys) = (batch.column(i), batch.column(j));
            let dom_j = state.dictionary.domain_size(j);
            let cells_possible = state.dictionary.domain_size(i).saturating_mul(dom_j);
            if cells_possible <= 16 * rows.max(256) {
                scratch.clear();
                scratch.resize(cells_possible, 0u64);
                for (x, y) in xs.iter().zip(ys) {
                    scratch[x.index() * dom_j + y.index()] += 1;
                }
                scratch
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(k, &c)| {
                        (
                            (ValueId((k / dom_j) as u32), ValueId((k % dom_j) as u32)),
                            c,
                        )
                    })
                    .collect()
            } else {
                let mut cells = BTreeMap::new();
                for (&x, &y) in xs.iter().zip(ys) {
                    *cells.entry((x, y)).or_insert(0) += 1;
                }
                cells
            }
        })
        .collect();
    DeltaCounts {
        rows: batch.rows() as u64,
        marginals,
        joints,
    }
}

/// Post-append marginal entropy from the pre-append entropy and the touched
/// values only.
///
/// `prior` is the pre-append table `f_i` indexed by value id (ids past its
/// end count as new); `delta` lists `(x, Δf_i(x))` for touched values.
pub fn update_marginal_entropy(
    h_old: f64,
    prior: &[u64],
    delta: &[(ValueId, u64)],
    n: u64,
    n_new: u64,
    log_base: &LogBase,
) -> Result<f64> {
    if n == 0 || n_new <= n {
        return Err(Error::InvalidDelta(format!("n = {n}, n' = {n_new}")));
    }
    let added: u64 = delta.iter().map(|&(_, d)| d).sum();
    if added != n_new - n {
        return Err(Error::InvalidDelta(format!(
            "deltas sum to {added}, expected {}",
            n_new - n
        )));
    }
    let (nf, nf_new) = (n as f64, n_new as f64);
    let mut s_upd = 0.0;
    let mut p_upd = 0.0;
    let mut h2 = 0.0;
    for &(x, d) in delta {
        let f = prior.get(x.index()).copied().unwrap_or(0);
        if f > 0 {
            let p = f as f64 / nf;
            s_upd += p * log_base.log(p);
            p_upd += p;
        }
        let p_new = (f + d) as f64 / nf_new;
        h2 -= p_new * log_base.log(p_new);
    }
    let scale = nf / nf_new;
    // log(n/n') = -log(1 + Δn/n)
    let log_scale = -log_base.log_1p((n_new - n) as f64 / nf);
    let h1 = scale * (h_old + s_upd) - scale * log_scale * (1.0 - p_upd);
    Ok(h1 + h2)
}

/// One touched joint cell `(x, y)` of a conditional column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellDelta {
    pub value: ValueId,
    /// f_ij(x, y) before the batch.
    pub prior: u64,
    /// Δf_ij(x, y), positive.
    pub delta: u64,
}

/// Post-append `H(A_i | A_j = y)`.
///
/// `cells` are the joint cells of column `y` touched by the batch, ascending
/// in x; `prior_total` and `delta_total` are f_j(y) and Δf_j(y).
pub fn update_conditional_entropy(
    h_old: Option<f64>,
    cells: &[CellDelta],
    prior_total: u64,
    delta_total: u64,
    log_base: &LogBase,
) -> Result<f64> {
    let added: u64 = cells.iter().map(|c| c.delta).sum();
    if added != delta_total {
        return Err(Error::InconsistentDelta {
            expected: delta_total,
            actual: added,
        });
    }
    if prior_total == 0 {
        // y first appears in this batch: the column is the delta alone.
        if delta_total == 0 {
            return Err(Error::ZeroTotal);
        }
        return Ok(entropy_of(
            cells.iter().map(|c| c.delta),
            delta_total,
            log_base,
        ));
    }
    let h_old = h_old.ok_or(Error::MissingPrior)?;
    if delta_total == 0 {
        // Column unchanged.
        return Ok(h_old);
    }

    let prior_f = prior_total as f64;
    let total_new = (prior_total + delta_total) as f64;
    let mut s_upd = 0.0;
    let mut p_upd = 0.0;
    let mut h2 = 0.0;
    for c in cells {
        if c.prior > 0 {
            let p = c.prior as f64 / prior_f;
            s_upd += p * log_base.log(p);
            p_upd += p;
        }
        let p_new = (c.prior + c.delta) as f64 / total_new;
        h2 -= p_new * log_base.log(p_new);
    }
    // c = f_j(y) / f'_j(y) = 1 / (1 + δ)
    let shrink = prior_f / total_new;
    let growth = log_base.log_1p(delta_total as f64 / prior_f);
    let h1 = shrink * (h_old + s_upd) + shrink * growth * (1.0 - p_upd);
    Ok(h1 + h2)
}

/// Applies one batch to the state (UpdateStates).
///
/// All new values are computed before anything is written, so an error leaves
/// the state unchanged. Conditional entropies of columns the batch does not
/// touch are neither read nor rewritten.
pub fn update_states(state: &mut MiningState, batch: &Batch) -> Result<UpdateReport> {
    validate_batch(state, batch)?;
    let arity = state.arity();
    let mut touches = 0u64;
    let delta = extract(state, batch, &mut touches);

    // New ids must extend each table without gaps.
    for (attr, deltas) in delta.marginals.iter().enumerate() {
        let old_len = state.freq.marginals[attr].len();
        let new_count = deltas.iter().filter(|d| d.is_new()).count();
        if deltas
            .iter()
            .any(|d| d.is_new() && d.value.index() >= old_len + new_count)
        {
            return Err(Error::InvalidBatch(format!(
                "attribute {attr}: batch skips value ids"
            )));
        }
    }

    let n = state.freq.n;
    let n_new = n + delta.rows;
    let base = state.log_base;

    let mut marginal_entropy = Vec::with_capacity(arity);
    for (attr, deltas) in delta.marginals.iter().enumerate() {
        let pairs: Vec<(ValueId, u64)> = deltas.iter().map(|d| (d.value, d.delta)).collect();
        touches += 1 + pairs.len() as u64;
        marginal_entropy.push(update_marginal_entropy(
            state.entropy.marginal[attr],
            &state.freq.marginals[attr],
            &pairs,
            n,
            n_new,
            &base,
        )?);
    }

    // (target, conditional attribute, conditional value, entropy)
    let mut pending: Vec<(usize, usize, ValueId, f64)> = Vec::new();
    for (i, j) in attribute_pairs(arity) {
        let p = pair_index(arity, i, j);
        let table = &state.freq.joints[p];
        let cells: Vec<(ValueId, ValueId, u64, u64)> = delta.joints[p]
            .iter()
            .map(|(&(x, y), &d)| {
                touches += 1;
                (x, y, table.get(x, y), d)
            })
            .collect();

        // Target i given j = y. Cells arrive sorted by (x, y), so bucketing
        // by y keeps x ascending within each column.
        let mut by_y: BTreeMap<ValueId, Vec<CellDelta>> = BTreeMap::new();
        for &(x, y, prior, d) in &cells {
            by_y.entry(y).or_default().push(CellDelta {
                value: x,
                prior,
                delta: d,
            });
        }
        for (y, column) in by_y {
            let h = conditional_for(state, &delta, i, j, y, &column, &mut touches)?;
            pending.push((i, j, y, h));
        }

        // Target j given i = x: cells for one x are contiguous with y ascending.
        for run in cells.chunk_by(|a, b| a.0 == b.0) {
            let x = run[0].0;
            let column: Vec<CellDelta> = run
                .iter()
                .map(|&(_, y, prior, d)| CellDelta {
                    value: y,
                    prior,
                    delta: d,
                })
                .collect();
            let h = conditional_for(state, &delta, j, i, x, &column, &mut touches)?;
            pending.push((j, i, x, h));
        }
    }

    // Commit.
    let mut new_values = 0u64;
    for (attr, deltas) in delta.marginals.iter().enumerate() {
        let table = &mut state.freq.marginals[attr];
        for d in deltas {
            if d.value.index() >= table.len() {
                table.resize(d.value.index() + 1, 0);
                new_values += 1;
            }
            table[d.value.index()] += d.delta;
            touches += 1;
        }
    }
    for (p, cells) in delta.joints.iter().enumerate() {
        let table = &mut state.freq.joints[p];
        for (&(x, y), &d) in cells {
            table.add(x, y, d);
            touches += 1;
        }
    }
    for (attr, h) in marginal_entropy.into_iter().enumerate() {
        state.entropy.marginal[attr] = h;
        touches += 1;
    }
    let conditional_updates = pending.len() as u64;
    for (i, j, y, h) in pending {
        let column = &mut state.entropy.conditional[i * arity + j];
        if y.index() >= column.len() {
            column.resize(y.index() + 1, f64::NAN);
        }
        column[y.index()] = h;
        touches += 1;
    }
    state.freq.n = n_new;
    state.batch_count += 1;

    Ok(UpdateReport {
        rows: delta.rows,
        touches,
        new_values,
        conditional_updates,
    })
}

fn conditional_for(
    state: &MiningState,
    delta: &DeltaCounts,
    target: usize,
    cond: usize,
    y: ValueId,
    column: &[CellDelta],
    touches: &mut u64,
) -> Result<f64> {
    let prior_total = state.freq.marginal_count(cond, y);
    let delta_total = delta.marginal_delta(cond, y);
    let h_old = if prior_total > 0 {
        *touches += 1;
        state.entropy.conditional(target, cond, y)
    } else {
        None
    };
    *touches += 1 + column.len() as u64;
    update_conditional_entropy(h_old, column, prior_total, delta_total, &state.log_base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{encode_batch, Dictionary, Schema};
    use crate::state::init_states;

    const H_2_1: f64 = 0.918_295_834_054_489_6;

    fn bits() -> LogBase {
        LogBase::bits()
    }

    fn state_from(rows: &[[&str; 2]]) -> MiningState {
        let schema = Schema::new(["A", "B"]).unwrap();
        let mut dict = Dictionary::new(2);
        let batch = encode_batch(&schema, &mut dict, rows).unwrap();
        init_states(&batch, schema, dict, 2.0).unwrap()
    }

    fn append(state: &mut MiningState, rows: &[[&str; 2]]) -> UpdateReport {
        let batch = state.encode(rows, "__NULL__").unwrap();
        update_states(state, &batch).unwrap()
    }

    #[test]
    fn marginal_update_hand_example() {
        // f = {a:2, b:1}; append one b.
        let h = update_marginal_entropy(H_2_1, &[2, 1], &[(ValueId(1), 1)], 3, 4, &bits()).unwrap();
        assert!((h - 1.0).abs() < 1e-12, "{h}");
    }

    #[test]
    fn marginal_update_with_new_value() {
        // [a x4] then [c x4]
        let h = update_marginal_entropy(0.0, &[4], &[(ValueId(1), 4)], 4, 8, &bits()).unwrap();
        assert!((h - 1.0).abs() < 1e-12, "{h}");
    }

    #[test]
    fn marginal_update_rejects_non_growth() {
        assert!(matches!(
            update_marginal_entropy(0.0, &[4], &[], 4, 4, &bits()),
            Err(Error::InvalidDelta(_))
        ));
        assert!(matches!(
            update_marginal_entropy(0.0, &[4], &[(ValueId(0), 2)], 4, 5, &bits()),
            Err(Error::InvalidDelta(_))
        ));
    }

    #[test]
    fn conditional_case_three_hand_example() {
        // Column y: a:2, b:1; append one (b, y).
        let cells = [CellDelta {
            value: ValueId(1),
            prior: 1,
            delta: 1,
        }];
        let h = update_conditional_entropy(Some(H_2_1), &cells, 3, 1, &bits()).unwrap();
        assert!((h - 1.0).abs() < 1e-12, "{h}");
    }

    #[test]
    fn conditional_case_two_is_identity() {
        let h_old = 0.123_456_789_f64;
        let h = update_conditional_entropy(Some(h_old), &[], 3, 0, &bits()).unwrap();
        assert_eq!(h.to_bits(), h_old.to_bits());
        assert!(matches!(
            update_conditional_entropy(None, &[], 3, 0, &bits()),
            Err(Error::MissingPrior)
        ));
    }

    #[test]
    fn conditional_case_one_uses_delta_only() {
        let cells = [
            CellDelta {
                value: ValueId(0),
                prior: 0,
                delta: 2,
            },
            CellDelta {
                value: ValueId(1),
                prior: 0,
                delta: 2,
            },
        ];
        let h = update_conditional_entropy(None, &cells, 0, 4, &bits()).unwrap();
        assert_eq!(h, 1.0);
    }

    #[test]
    fn conditional_rejects_inconsistent_delta() {
        let cells = [CellDelta {
            value: ValueId(0),
            prior: 1,
            delta: 1,
        }];
        assert!(matches!(
            update_conditional_entropy(Some(0.0), &cells, 1, 2, &bits()),
            Err(Error::InconsistentDelta {
                expected: 2,
                actual: 1
            })
        ));
        assert!(matches!(
            update_conditional_entropy(None, &cells, 1, 1, &bits()),
            Err(Error::MissingPrior)
        ));
    }

    /// Untouched column, written out in full: split H(y) into the x-terms of
    /// an arbitrary subset and add them back, which must reproduce H_old.
    #[test]
    fn untouched_column_decomposition_reproduces_prior() {
        let column = [5u64, 3, 2];
        let total: u64 = column.iter().sum();
        let base = bits();
        let h_old = entropy_of(column.iter().copied(), total, &base);
        // Mark x = 1 as "updated" via the marginal partition.
        let p = column[1] as f64 / total as f64;
        let s_upd = p * base.log(p);
        let h1 = h_old + s_upd;
        let h2 = -s_upd;
        assert!((h1 + h2 - h_old).abs() < 1e-15);
    }

    #[test]
    fn delta_extraction_partitions() {
        let state = state_from(&[["a", "y"], ["a", "y"], ["b", "y"]]);
        let mut s = state.clone();
        let batch = s.encode(&[["b", "y"]], "__NULL__").unwrap();
        let d = extract_delta(&s, &batch).unwrap();
        assert_eq!(d.rows, 1);
        assert_eq!(d.marginal_delta(0, ValueId(1)), 1);
        assert_eq!(d.updated(0).collect::<Vec<_>>(), vec![ValueId(1)]);
        assert_eq!(d.new_values(0).count(), 0);

        let batch = s.encode(&[["c", "y"], ["c", "y"]], "__NULL__").unwrap();
        let d = extract_delta(&s, &batch).unwrap();
        assert_eq!(d.new_values(0).collect::<Vec<_>>(), vec![ValueId(2)]);
        assert_eq!(d.marginal_delta(0, ValueId(2)), 2);
        assert_eq!(d.joints[0].get(&(ValueId(2), ValueId(0))), Some(&2));
    }

    #[test]
    fn update_states_demo_fixture() {
        let mut s = state_from(&[["a", "y"], ["a", "y"], ["b", "y"], ["b", "z"]]);
        let z = s.dictionary().lookup(1, "z").unwrap();
        let y = s.dictionary().lookup(1, "y").unwrap();
        let hz_before = s.conditional_entropy(0, 1, z).unwrap();
        append(&mut s, &[["b", "y"]]);
        assert_eq!(s.n(), 5);
        assert!((s.marginal_entropy(0) - 0.970_950_594_454_668_5).abs() < 1e-12);
        assert!((s.conditional_entropy(0, 1, y).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            s.conditional_entropy(0, 1, z).unwrap().to_bits(),
            hz_before.to_bits()
        );
        assert_eq!(s.batch_count(), 2);
    }

    #[test]
    fn new_conditional_value_takes_case_one() {
        let mut s = state_from(&[["a", "y"], ["b", "y"]]);
        append(&mut s, &[["a", "w"], ["a", "w"], ["b", "w"], ["b", "w"]]);
        let w = s.dictionary().lookup(1, "w").unwrap();
        assert_eq!(s.conditional_entropy(0, 1, w), Some(1.0));
    }

    #[test]
    fn batch_with_foreign_ids_is_rejected_without_mutation() {
        let mut s = state_from(&[["a", "y"]]);
        let before = s.clone();
        let batch = Batch::from_columns(vec![vec![ValueId(9)], vec![ValueId(0)]]).unwrap();
        assert!(matches!(
            update_states(&mut s, &batch),
            Err(Error::UnknownValue { attr: 0, value: 9 })
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn touches_scale_with_batch_not_relation() {
        let mut s = state_from(&[["a", "y"], ["b", "z"]]);
        let mut last = None;
        for _ in 0..50 {
            let r = append(&mut s, &[["a", "y"], ["b", "z"], ["a", "z"]]);
            if let Some(prev) = last {
                assert_eq!(r.touches, prev);
            }
            last = Some(r.touches);
        }
        // arity 2, Δn 3
        assert!(last.unwrap() <= 16 * 3 * 4);
    }
}
