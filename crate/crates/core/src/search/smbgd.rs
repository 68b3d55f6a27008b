//! Successive halving over candidate crosses, where pulling an arm means one
//! more pass of field-wise SGD over fresh data blocks.

use std::ops::Range;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{CrossFeature, CrossHasher, EncodedData, HashConfig};
use crate::lr::{auc, sigmoid, train_field_wise, FieldWeights, LRHyperParams};
use crate::tabular::{ceil_log2, BlockPartition, BsumCache};

/// One candidate cross and its warm training state.
#[derive(Debug, Clone)]
pub struct CandidateArm {
    pub cross: CrossFeature,
    pub weights: FieldWeights,
    pub blocks_consumed: usize,
    pub current_auc: f64,
    valid_buckets: Vec<u32>,
}

impl CandidateArm {
    pub fn new(cross: CrossFeature) -> Self {
        Self {
            cross,
            weights: FieldWeights::new(),
            blocks_consumed: 0,
            current_auc: 0.5,
            valid_buckets: Vec::new(),
        }
    }
}

/// Read-only inputs shared by every arm.
#[derive(Debug, Clone, Copy)]
pub struct SmbgdInput<'a> {
    /// Base-field buckets of the training split.
    pub train: &'a EncodedData,
    /// Base-field buckets of the validation split.
    pub valid: &'a EncodedData,
    pub hash: &'a HashConfig,
    pub partition: &'a BlockPartition,
    pub bsum: &'a BsumCache,
    pub hyper: &'a LRHyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Block ids trained in this round.
    pub blocks: Range<usize>,
    pub arms: usize,
    pub survivors: usize,
}

#[derive(Debug, Clone)]
pub struct SmbgdOutcome {
    pub winner: CandidateArm,
    pub rounds: Vec<RoundRecord>,
    /// Arm-block trainings performed.
    pub pulls: usize,
    /// Distinct blocks scheduled.
    pub blocks_used: usize,
}

/// Best first: higher AUC, then the simpler cross.
fn rank(a: &CandidateArm, b: &CandidateArm) -> std::cmp::Ordering {
    b.current_auc
        .total_cmp(&a.current_auc)
        .then_with(|| a.cross.simplicity_cmp(&b.cross))
}

enum Source<'a> {
    Column(&'a [u32]),
    Cross(CrossHasher, &'a EncodedData),
}

impl Source<'_> {
    #[inline]
    fn bucket(&self, row: usize) -> u32 {
        match self {
            Source::Column(c) => c[row],
            Source::Cross(h, data) => h.bucket_with(|id| data.columns[id as usize][row]),
        }
    }
}

fn source<'a>(cross: &CrossFeature, data: &'a EncodedData, hash: &HashConfig) -> Source<'a> {
    if cross.is_original() {
        Source::Column(&data.columns[cross.constituents()[0].index()])
    } else {
        Source::Cross(CrossHasher::new(cross, hash), data)
    }
}

fn pull(arm: &mut CandidateArm, blocks: &[Range<usize>], input: &SmbgdInput<'_>) -> Result<()> {
    let src = source(&arm.cross, input.train, input.hash);
    let lane = input.bsum.lane();
    let warm = std::mem::take(&mut arm.weights);
    arm.weights = match train_field_wise(|r| src.bucket(r), &input.train.labels, blocks, &lane, Some(warm), input.hyper) {
        Ok(w) => w,
        // A diverged arm stays in the pool with the worst possible score.
        Err(Error::Diverged) => {
            arm.current_auc = f64::NEG_INFINITY;
            arm.blocks_consumed += blocks.len();
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    arm.blocks_consumed += blocks.len();
    if arm.valid_buckets.is_empty() && input.valid.n_rows() > 0 {
        let vs = source(&arm.cross, input.valid, input.hash);
        arm.valid_buckets = (0..input.valid.n_rows()).map(|r| vs.bucket(r)).collect();
    }
    let scores: Vec<f64> = arm
        .valid_buckets
        .iter()
        .zip(&input.bsum.valid)
        .map(|(&b, &s)| sigmoid(arm.weights.get(b) + s))
        .collect();
    arm.current_auc = auc(&scores, &input.valid.labels);
    Ok(())
}

/// Run successive halving: round `k` trains every survivor on the next `2^k`
/// unused blocks, then keeps the best `floor(n/2)` (at least one).
pub fn smbgd(arms: Vec<CandidateArm>, input: &SmbgdInput<'_>, pool: &ThreadPool) -> Result<SmbgdOutcome> {
    if arms.is_empty() {
        return Err(Error::InvalidArgument("successive halving needs at least one arm".into()));
    }
    let ranges = &input.partition.ranges;
    let rounds = ceil_log2(arms.len()).max(1) as usize;
    let mut alive = arms;
    let mut next_block = 0usize;
    let mut records = Vec::with_capacity(rounds);
    let mut pulls = 0;
    for k in 0..rounds {
        let want = 1usize << k;
        let take = want.min(ranges.len() - next_block);
        if take < want {
            log::warn!("round {k} wanted {want} fresh blocks, {take} left");
        }
        let ids = next_block..next_block + take;
        next_block += take;
        let blocks = &ranges[ids.clone()];
        if !blocks.is_empty() {
            pool.install(|| alive.par_iter_mut().try_for_each(|arm| pull(arm, blocks, input)))?;
            pulls += alive.len() * take;
        }
        alive.sort_by(rank);
        let arms_in = alive.len();
        alive.truncate((arms_in / 2).max(1));
        records.push(RoundRecord {
            round: k,
            blocks: ids,
            arms: arms_in,
            survivors: alive.len(),
        });
        if alive.len() == 1 {
            break;
        }
    }
    let winner = alive.swap_remove(0);
    Ok(SmbgdOutcome {
        winner,
        rounds: records,
        pulls,
        blocks_used: next_block,
    })
}
