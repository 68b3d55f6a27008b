//! Equal-width, multi-granularity discretization of numerical columns and the
//! keep-best-half granularity filter.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BaseFieldId, CrossFeature};
use crate::lr::{self, DesignView, LRHyperParams};

/// Bin edges for one numerical schema column and the granularities kept for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericBinning {
    pub column: usize,
    pub min: f64,
    pub max: f64,
    pub granularities: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSpec {
    pub columns: Vec<NumericBinning>,
}

impl DiscretizationSpec {
    pub fn binning_for(&self, column: usize) -> Option<&NumericBinning> {
        self.columns.iter().find(|b| b.column == column)
    }
}

/// `clamp(floor((v - min) * g / (max - min)), 0, g - 1)`; a constant column
/// (or a NaN) maps to bin 0.
#[inline]
pub fn bin_index(v: f64, min: f64, max: f64, g: u32) -> u32 {
    if !(max > min) {
        return 0;
    }
    let t = ((v - min) * f64::from(g) / (max - min)).floor();
    if t.is_nan() || t <= 0.0 {
        0
    } else if t >= f64::from(g - 1) {
        g - 1
    } else {
        t as u32
    }
}

/// `{10^p}` for `p = 1..=levels`.
pub fn default_levels(levels: u32) -> Vec<u32> {
    (1..=levels).map(|p| 10u32.pow(p)).collect()
}

/// Granularity levels chosen from the training size: three levels, four
/// beyond five million rows.
pub fn levels_for_rows(rows: usize) -> Vec<u32> {
    default_levels(if rows > 5_000_000 { 4 } else { 3 })
}

fn check_levels(levels: &[u32]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("granularity levels are empty".into()));
    }
    if levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "granularities must be positive and strictly increasing, got {levels:?}"
        )));
    }
    Ok(())
}

/// One numeric column discretized at several granularities.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGranularity {
    pub min: f64,
    pub max: f64,
    pub levels: Vec<u32>,
    /// `bins[i][row]` is the bin of `row` at `levels[i]`.
    pub bins: Vec<Vec<u32>>,
}

pub fn discretize_multi_granularity(column: &[f64], levels: &[u32]) -> Result<MultiGranularity> {
    check_levels(levels)?;
    let (min, max) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (min, max) = if column.is_empty() { (0.0, 0.0) } else { (min, max) };
    let bins = levels
        .iter()
        .map(|&g| column.iter().map(|&v| bin_index(v, min, max, g)).collect())
        .collect();
    Ok(MultiGranularity {
        min,
        max,
        levels: levels.to_vec(),
        bins,
    })
}

/// Keep the best `ceil(n/2)` granularities by score; ties go to the coarser
/// one. Returned in increasing granularity.
pub fn keep_best_half(scored: &[(u32, f64)]) -> Vec<u32> {
    let mut ranked = scored.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<u32> = ranked
        .iter()
        .take(scored.len().div_ceil(2))
        .map(|&(g, _)| g)
        .collect();
    kept.sort_unstable();
    kept
}

/// Hashed candidate field for one granularity of a numeric column.
#[derive(Debug, Clone, Copy)]
pub struct GranularityCandidate<'a> {
    pub granularity: u32,
    pub train: &'a [u32],
    pub valid: &'a [u32],
}

/// Score each candidate with a single-field LR (bias + that field) trained by
/// one pass over at most the first two blocks, then keep the best half by
/// validation AUC.
pub fn filter_granularities(
    candidates: &[GranularityCandidate<'_>],
    train_labels: &[u8],
    blocks: &[Range<usize>],
    valid_labels: &[u8],
    hyper: &LRHyperParams,
) -> Result<Vec<u32>> {
    if candidates.len() <= 1 {
        return Ok(candidates.iter().map(|c| c.granularity).collect());
    }
    let budget = &blocks[..blocks.len().min(2)];
    let one_pass = LRHyperParams { epochs: 1, ..*hyper };
    let field = [CrossFeature::single(BaseFieldId(0))];
    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let train = DesignView {
            columns: vec![c.train],
            labels: train_labels,
        };
        let valid = DesignView {
            columns: vec![c.valid],
            labels: valid_labels,
        };
        let auc = match lr::train_full(&train, budget, &valid, &field, &one_pass) {
            Ok((_, metric)) => metric.auc,
            Err(Error::Diverged) => 0.0,
            Err(e) => return Err(e),
        };
        scored.push((c.granularity, auc));
    }
    Ok(keep_best_half(&scored))
}
