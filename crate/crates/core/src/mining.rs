//! Information gain per cell, ranking, percentile banding and mutual
//! information. Read-only over the cached entropies.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::relation::ValueId;
use crate::state::MiningState;

/// Heatmap band of a cell relative to its target's IG distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    /// At or above the 75th percentile.
    Top25,
    /// At or above the median.
    Top50,
    Base,
}

impl Band {
    pub fn as_str(&self) -> &'static str {
        match self {
            Band::Top25 => "top25",
            Band::Top50 => "top50",
            Band::Base => "base",
        }
    }
}

/// One scored (target attribute, conditional attribute = value) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgCell {
    pub target: usize,
    pub cond_attr: usize,
    pub cond_value: ValueId,
    pub ig: f64,
    pub band: Option<Band>,
}

impl IgCell {
    fn key(&self) -> (usize, usize, ValueId) {
        (self.target, self.cond_attr, self.cond_value)
    }
}

fn check_attr(state: &MiningState, attr: usize) -> Result<()> {
    if attr < state.arity() {
        Ok(())
    } else {
        Err(Error::UnknownAttribute(format!("#{attr}")))
    }
}

/// `H(A_i) − H(A_i | A_j = y)` from the caches.
pub fn information_gain(state: &MiningState, i: usize, j: usize, y: ValueId) -> Result<f64> {
    check_attr(state, i)?;
    check_attr(state, j)?;
    if i == j {
        return Err(Error::SameAttribute(i));
    }
    let h_cond = state
        .conditional_entropy(i, j, y)
        .ok_or(Error::UnknownValue {
            attr: j,
            value: y.0,
        })?;
    Ok(state.marginal_entropy(i) - h_cond)
}

/// Every cell, optionally restricted to one target, in (i, j, y) order.
pub fn cells(state: &MiningState, target: Option<usize>) -> Result<Vec<IgCell>> {
    if let Some(t) = target {
        check_attr(state, t)?;
    }
    let arity = state.arity();
    let targets: Vec<usize> = match target {
        Some(t) => vec![t],
        None => (0..arity).collect(),
    };
    let mut out = Vec::new();
    for i in targets {
        let h = state.marginal_entropy(i);
        for j in (0..arity).filter(|&j| j != i) {
            let column = state.entropies().conditional_column(i, j);
            out.extend(column.iter().enumerate().map(|(y, &hc)| IgCell {
                target: i,
                cond_attr: j,
                cond_value: ValueId(y as u32),
                ig: h - hc,
                band: None,
            }));
        }
    }
    Ok(out)
}

fn rank_order(a: &IgCell, b: &IgCell) -> Ordering {
    b.ig.total_cmp(&a.ig).then_with(|| a.key().cmp(&b.key()))
}

/// The `k` highest-IG cells; ties broken by (target, cond_attr, cond_value).
pub fn top_k(state: &MiningState, target: Option<usize>, k: usize) -> Result<Vec<IgCell>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut all = cells(state, target)?;
    all.sort_by(rank_order);
    all.truncate(k);
    Ok(all)
}

/// Nearest-rank percentile thresholds `(p75, p50)`.
///
/// The q-quantile is the ascending value at 1-based rank `floor(q·N) + 1`,
/// so the top `ceil((1−q)·N)` values reach it.
pub fn band_thresholds(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let at = |q_num: usize| {
        let rank = (q_num * n / 100 + 1).min(n);
        sorted[rank - 1]
    };
    Some((at(75), at(50)))
}

pub fn band_of(ig: f64, thresholds: (f64, f64)) -> Band {
    let (p75, p50) = thresholds;
    if ig >= p75 {
        Band::Top25
    } else if ig >= p50 {
        Band::Top50
    } else {
        Band::Base
    }
}

/// All cells for `target`, labelled with their percentile band. Returned in
/// (cond_attr, cond_value) order.
pub fn heatmap_bands(state: &MiningState, target: usize) -> Result<Vec<IgCell>> {
    let mut all = cells(state, Some(target))?;
    let igs: Vec<f64> = all.iter().map(|c| c.ig).collect();
    if let Some(th) = band_thresholds(&igs) {
        for c in &mut all {
            c.band = Some(band_of(c.ig, th));
        }
    }
    Ok(all)
}

/// `I(A_i; A_j) = Σ_y p_j(y)·IG_i(A_j = y)`.
pub fn mutual_information(state: &MiningState, i: usize, j: usize) -> Result<f64> {
    check_attr(state, i)?;
    check_attr(state, j)?;
    if i == j {
        return Err(Error::SameAttribute(i));
    }
    let n = state.n() as f64;
    let h = state.marginal_entropy(i);
    let weights = state.frequencies().marginal(j);
    let column = state.entropies().conditional_column(i, j);
    Ok(weights
        .iter()
        .zip(column)
        .map(|(&f, &hc)| (f as f64 / n) * (h - hc))
        .sum())
}
