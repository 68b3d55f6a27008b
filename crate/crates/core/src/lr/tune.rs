//! Log-grid search over learning rate and the L1/L2 penalties.

use std::ops::Range;

use rayon::prelude::*;

use super::{train_full, DesignView, LRHyperParams, DEFAULT_BATCH_SIZE};
use crate::error::{Error, Result};
use crate::features::CrossFeature;

/// `points` log-spaced values from `lo` to `hi`, endpoints exact.
pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / (points - 1) as f64;
            (0..points)
                .map(|i| match i {
                    0 => lo,
                    i if i == points - 1 => hi,
                    i => (a + step * i as f64).exp(),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneGrid {
    pub alpha: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TuneGrid {
    /// Six points each: alpha over [0.005, 1], l1 and l2 over [1e-4, 10].
    fn default() -> Self {
        Self {
            alpha: log_space(0.005, 1.0, 6),
            l1: log_space(1e-4, 10.0, 6),
            l2: log_space(1e-4, 10.0, 6),
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: 1,
        }
    }
}

impl TuneGrid {
    /// Grid points in alpha-major, then l1, then l2 order.
    pub fn points(&self) -> Vec<LRHyperParams> {
        let mut out = Vec::with_capacity(self.alpha.len() * self.l1.len() * self.l2.len());
        for &alpha in &self.alpha {
            for &l1 in &self.l1 {
                for &l2 in &self.l2 {
                    out.push(LRHyperParams {
                        alpha,
                        l1,
                        l2,
                        batch_size: self.batch_size,
                        epochs: self.epochs,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: LRHyperParams,
    pub best_auc: f64,
    /// Validation AUC per grid point, in [`TuneGrid::points`] order; diverged
    /// fits score negative infinity.
    pub scores: Vec<(LRHyperParams, f64)>,
}

impl TuneOutcome {
    pub fn evaluated(&self) -> usize {
        self.scores.len()
    }
}

/// Train every grid point on `fields` and keep the best by validation AUC;
/// the earliest grid point wins ties. Runs on the current rayon pool.
pub fn tune_hyperparams(
    train: &DesignView<'_>,
    blocks: &[Range<usize>],
    valid: &DesignView<'_>,
    fields: &[CrossFeature],
    grid: &TuneGrid,
) -> Result<TuneOutcome> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty tuning grid".into()));
    }
    let scores: Vec<(LRHyperParams, f64)> = points
        .par_iter()
        .map(|h| match train_full(train, blocks, valid, fields, h) {
            Ok((_, m)) => Ok((*h, m.auc)),
            Err(Error::Diverged) => Ok((*h, f64::NEG_INFINITY)),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (_, a)) in scores.iter().enumerate() {
        if *a > scores[best].1 {
            best = i;
        }
    }
    log::info!(
        "tuned alpha={} l1={} l2={} (validation AUC {:.5})",
        scores[best].0.alpha,
        scores[best].0.l1,
        scores[best].0.l2,
        scores[best].1
    );
    Ok(TuneOutcome {
        best: scores[best].0,
        best_auc: scores[best].1,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::BaseFieldId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_space_endpoints() {
        let a = log_space(0.005, 1.0, 6);
        assert_eq!(a.len(), 6);
        assert_eq!(a[0], 0.005);
        assert_eq!(a[5], 1.0);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        let ratio = a[1] / a[0];
        assert!(a.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-12));
    }

    #[test]
    fn full_grid_is_216_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 600;
        let cols: Vec<Vec<u32>> = (0..2).map(|_| (0..n).map(|_| rng.random_range(0..6)).collect()).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(cols[0][i] < 3) ^ u8::from(rng.random_bool(0.2))).collect();
        let view = DesignView {
            columns: cols.iter().map(Vec::as_slice).collect(),
            labels: &labels,
        };
        let fields = [CrossFeature::single(BaseFieldId(0)), CrossFeature::single(BaseFieldId(1))];
        let grid = TuneGrid::default();
        let a = tune_hyperparams(&view, &[0..n], &view, &fields, &grid).unwrap();
        let b = tune_hyperparams(&view, &[0..n], &view, &fields, &grid).unwrap();
        assert_eq!(a.evaluated(), 216);
        assert_eq!(a.best, b.best);
        assert!((0.005..=1.0).contains(&a.best.alpha));
        assert!((1e-4..=10.0).contains(&a.best.l1));
        assert!((1e-4..=10.0).contains(&a.best.l2));
        assert!(a.best_auc > 0.7);
    }
}
