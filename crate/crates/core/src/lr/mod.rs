//! Logistic regression over hashed sparse fields.
//!
//! A model holds one sparse weight vector per field (base or cross) plus a
//! bias. Training is plain mini-batch SGD with an L2 term in the gradient step
//! and an L1 proximal soft-threshold afterwards; only coordinates touched by a
//! mini-batch are updated.

pub mod auc;
pub mod residual;
pub mod sgd;
pub mod tune;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CrossFeature;

pub use auc::{auc, auc_checked, AucResult};
pub use residual::cin_residual;
pub use sgd::{evaluate, train_field_wise, train_full, train_full_with, TrainOptions};
pub use tune::{log_space, tune_hyperparams, TuneGrid, TuneOutcome};

pub const DEFAULT_BATCH_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LRHyperParams {
    pub alpha: f64,
    pub l1: f64,
    pub l2: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Passes over the training blocks in full (all-field) training.
    /// Field-wise training always makes a single pass per block.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_epochs() -> usize {
    1
}

impl Default for LRHyperParams {
    /// Used before tuning has run (granularity filtering).
    fn default() -> Self {
        Self {
            alpha: 0.1,
            l1: 1e-4,
            l2: 1e-4,
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: 1,
        }
    }
}

impl LRHyperParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha.is_finite()
            && self.l1 >= 0.0
            && self.l2 >= 0.0
            && self.l1.is_finite()
            && self.l2.is_finite()
            && self.batch_size > 0
            && self.epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid LR hyper-parameters {self:?}")))
        }
    }
}

/// Sparse weights of one field, keyed by bucket id; absent buckets are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldWeights {
    map: FxHashMap<u32, f64>,
}

impl FieldWeights {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn get(&self, bucket: u32) -> f64 {
        self.map.get(&bucket).copied().unwrap_or(0.0)
    }

    #[inline]
    pub fn set(&mut self, bucket: u32, w: f64) {
        if w == 0.0 {
            self.map.remove(&bucket);
        } else {
            self.map.insert(bucket, w);
        }
    }

    pub fn nnz(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.map.iter().map(|(&b, &w)| (b, w))
    }

    pub fn is_finite(&self) -> bool {
        self.map.values().all(|w| w.is_finite())
    }

    pub fn norm_l2(&self) -> f64 {
        let mut sq: Vec<f64> = self.map.values().map(|w| w * w).collect();
        sq.sort_by(f64::total_cmp);
        sq.iter().sum::<f64>().sqrt()
    }

    /// Dense `f32` vector of length `bucket_count`.
    pub fn to_dense_f32(&self, bucket_count: usize) -> Vec<f32> {
        let mut out = vec![0.0f32; bucket_count];
        for (b, w) in self.iter() {
            out[b as usize] = w as f32;
        }
        out
    }

    pub fn from_dense_f32(dense: &[f32]) -> Self {
        let mut fw = Self::new();
        for (b, &w) in dense.iter().enumerate() {
            fw.set(b as u32, f64::from(w));
        }
        fw
    }

    fn quantized(&self) -> Self {
        let mut fw = Self::new();
        for (b, w) in self.iter() {
            fw.set(b, f64::from(w as f32));
        }
        fw
    }

    /// Bitwise comparison, used to check replay equivalences.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.map.len() == other.map.len()
            && self
                .map
                .iter()
                .all(|(b, w)| other.map.get(b).is_some_and(|o| o.to_bits() == w.to_bits()))
    }
}

/// Columns of bucket ids aligned with some field list, plus labels.
#[derive(Debug, Clone)]
pub struct DesignView<'a> {
    pub columns: Vec<&'a [u32]>,
    pub labels: &'a [u8],
}

impl DesignView<'_> {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LRModel {
    pub bias: f64,
    pub fields: Vec<CrossFeature>,
    pub weights: Vec<FieldWeights>,
    pub hyper: LRHyperParams,
}

impl LRModel {
    pub fn zeros(fields: Vec<CrossFeature>, hyper: LRHyperParams) -> Self {
        let weights = vec![FieldWeights::new(); fields.len()];
        Self {
            bias: 0.0,
            fields,
            weights,
            hyper,
        }
    }

    /// Positions of `members` among the model's fields.
    pub fn slots_for(&self, members: &[CrossFeature]) -> Result<Vec<usize>> {
        members
            .iter()
            .map(|m| {
                self.fields
                    .iter()
                    .position(|f| f == m)
                    .ok_or_else(|| Error::FieldMismatch(format!("model has no weights for field {m}")))
            })
            .collect()
    }

    /// `bias + sum_f w_f[row[f]]`, accumulated in field order.
    #[inline]
    pub fn logit(&self, row: &[u32]) -> f64 {
        let mut z = self.bias;
        for (w, &b) in self.weights.iter().zip(row) {
            z += w.get(b);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(FieldWeights::is_finite)
    }

    /// Copy with every weight rounded through `f32`, matching what the
    /// artifact stores.
    pub fn quantized(&self) -> Self {
        Self {
            bias: f64::from(self.bias as f32),
            fields: self.fields.clone(),
            weights: self.weights.iter().map(FieldWeights::quantized).collect(),
            hyper: self.hyper,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability for one encoded row (`row[i]` is the bucket of model field `i`).
pub fn predict(model: &LRModel, row: &[u32]) -> Result<f64> {
    if row.len() != model.fields.len() {
        return Err(Error::FieldMismatch(format!(
            "row has {} buckets, model has {} fields",
            row.len(),
            model.fields.len()
        )));
    }
    Ok(sigmoid(model.logit(row)))
}

/// Validation quality of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetric {
    pub auc: f64,
    pub logloss: f64,
    /// Set when the labels hold a single class and AUC is undefined.
    pub degenerate: bool,
}

pub fn logloss(probs: &[f64], labels: &[u8]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let eps = 1e-15;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}
