//! Mini-batch SGD: full training over every field and field-wise training of a
//! single new field against a frozen `b_sum`.
//!
//! Mini-batches never straddle a block boundary, so training on blocks `P`
//! then `Q` with warm-start replays exactly the same updates as training on
//! `P ++ Q` in one call.

use std::ops::Range;

use rustc_hash::FxHashMap;

use super::{auc_checked, logloss, sigmoid, DesignView, EvalMetric, FieldWeights, LRHyperParams, LRModel};
use crate::error::{Error, Result};
use crate::features::CrossFeature;
use crate::tabular::BsumLane;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Keep the bias at its initial value.
    pub freeze_bias: bool,
    /// Continue from this model instead of zeros (fields must match).
    pub init: Option<LRModel>,
}

/// Gradient step with L2 followed by the L1 proximal map, on the coordinates
/// touched by the current mini-batch.
#[inline]
fn apply_update(w: &mut FieldWeights, grads: &FxHashMap<u32, f64>, batch_len: f64, hyper: &LRHyperParams) {
    let threshold = hyper.alpha * hyper.l1;
    for (&bucket, &gsum) in grads {
        let cur = w.get(bucket);
        let stepped = cur - hyper.alpha * (gsum / batch_len + hyper.l2 * cur);
        w.set(bucket, soft_threshold(stepped, threshold));
    }
}

#[inline]
fn soft_threshold(w: f64, t: f64) -> f64 {
    // Written so that a NaN falls through and is caught as divergence.
    if w.abs() <= t {
        0.0
    } else {
        w - t.copysign(w)
    }
}

fn batches(blocks: &[Range<usize>], batch_size: usize) -> impl Iterator<Item = Range<usize>> + '_ {
    blocks.iter().flat_map(move |r| {
        let (start, end) = (r.start, r.end);
        (start..end)
            .step_by(batch_size)
            .map(move |s| s..(s + batch_size).min(end))
    })
}

/// `hyper.epochs` passes of mini-batch SGD over `blocks` of `train` for all
/// `fields`, then validation AUC and logloss.
pub fn train_full(
    train: &DesignView<'_>,
    blocks: &[Range<usize>],
    valid: &DesignView<'_>,
    fields: &[CrossFeature],
    hyper: &LRHyperParams,
) -> Result<(LRModel, EvalMetric)> {
    train_full_with(train, blocks, valid, fields, hyper, &TrainOptions::default())
}

pub fn train_full_with(
    train: &DesignView<'_>,
    blocks: &[Range<usize>],
    valid: &DesignView<'_>,
    fields: &[CrossFeature],
    hyper: &LRHyperParams,
    opts: &TrainOptions,
) -> Result<(LRModel, EvalMetric)> {
    hyper.validate()?;
    if blocks.iter().all(|r| r.is_empty()) {
        return Err(Error::EmptyTrainingData);
    }
    if train.columns.len() != fields.len() || valid.columns.len() != fields.len() {
        return Err(Error::FieldMismatch(format!(
            "{} fields but {} train / {} validation columns",
            fields.len(),
            train.columns.len(),
            valid.columns.len()
        )));
    }
    let mut model = match &opts.init {
        Some(m) if m.fields == fields => m.clone(),
        Some(_) => return Err(Error::FieldMismatch("initial model fields differ".into())),
        None => LRModel::zeros(fields.to_vec(), *hyper),
    };
    model.hyper = *hyper;

    let mut grads: Vec<FxHashMap<u32, f64>> = vec![FxHashMap::default(); fields.len()];
    for batch in (0..hyper.epochs).flat_map(|_| batches(blocks, hyper.batch_size)) {
        let mut bias_grad = 0.0;
        for row in batch.clone() {
            let mut z = model.bias;
            for (w, col) in model.weights.iter().zip(&train.columns) {
                z += w.get(col[row]);
            }
            let g = sigmoid(z) - f64::from(train.labels[row]);
            bias_grad += g;
            for (acc, col) in grads.iter_mut().zip(&train.columns) {
                *acc.entry(col[row]).or_insert(0.0) += g;
            }
        }
        let n = batch.len() as f64;
        if !opts.freeze_bias {
            model.bias -= hyper.alpha * bias_grad / n;
        }
        for (w, acc) in model.weights.iter_mut().zip(grads.iter_mut()) {
            apply_update(w, acc, n, hyper);
            acc.clear();
        }
    }
    if !model.is_finite() {
        return Err(Error::Diverged);
    }
    let metric = evaluate(&model, valid);
    Ok((model, metric))
}

/// Validation metrics of `model`; `data` columns align with the model fields.
pub fn evaluate(model: &LRModel, data: &DesignView<'_>) -> EvalMetric {
    let probs: Vec<f64> = (0..data.n_rows())
        .map(|row| {
            let mut z = model.bias;
            for (w, col) in model.weights.iter().zip(&data.columns) {
                z += w.get(col[row]);
            }
            sigmoid(z)
        })
        .collect();
    let a = auc_checked(&probs, data.labels);
    EvalMetric {
        auc: a.auc,
        logloss: logloss(&probs, data.labels),
        degenerate: a.degenerate,
    }
}

/// Train only the weights of one new field, with every other term frozen
/// into `b_sum`: `p = sigmoid(w_c[bucket(row)] + b_sum[row])`.
///
/// `bucket_of(row)` yields the candidate's bucket for a training row. Rows in
/// `blocks` must carry the lane's current stamp.
pub fn train_field_wise<F>(
    bucket_of: F,
    labels: &[u8],
    blocks: &[Range<usize>],
    bsum: &BsumLane<'_>,
    warm: Option<FieldWeights>,
    hyper: &LRHyperParams,
) -> Result<FieldWeights>
where
    F: Fn(usize) -> u32,
{
    hyper.validate()?;
    for block in blocks {
        bsum.check(block)?;
    }
    let mut w = warm.unwrap_or_default();
    let mut grads: FxHashMap<u32, f64> = FxHashMap::default();
    for batch in batches(blocks, hyper.batch_size) {
        for row in batch.clone() {
            let b = bucket_of(row);
            let z = w.get(b) + bsum.values[row];
            let g = sigmoid(z) - f64::from(labels[row]);
            *grads.entry(b).or_insert(0.0) += g;
        }
        apply_update(&mut w, &grads, batch.len() as f64, hyper);
        grads.clear();
    }
    if !w.is_finite() {
        return Err(Error::Diverged);
    }
    Ok(w)
}
