//! Width-one beam search: expand the current solution, pick the best new
//! cross by successive halving, retrain, and adopt or stop.

use std::time::{Duration, Instant};

use rayon::ThreadPool;
use rustc_hash::FxHashMap;

use super::smbgd::{smbgd, CandidateArm, SmbgdInput};
use super::{IterationRecord, SearchControl, SearchState, StopReason, TerminationConfig};
use crate::error::{Error, Result};
use crate::features::{candidate_crosses, CrossFeature, EncodedData, FeatureSet, HashConfig};
use crate::lr::{train_full, DesignView, LRHyperParams};
use crate::tabular::{halving_budget, partition_blocks, BlockRule, BsumCache};

/// Encoded splits and the settings the search needs.
#[derive(Debug, Clone, Copy)]
pub struct SearchData<'a> {
    pub train: &'a EncodedData,
    pub valid: &'a EncodedData,
    pub hash: HashConfig,
    pub block_rule: BlockRule,
    /// Base field names, for progress records.
    pub names: &'a [String],
}

impl SearchData<'_> {
    fn n_base(&self) -> usize {
        self.train.columns.len()
    }
}

/// Bucket columns of adopted crosses, so each is hashed once per run.
struct ColumnCache<'a> {
    data: SearchData<'a>,
    crosses: FxHashMap<CrossFeature, (Vec<u32>, Vec<u32>)>,
}

impl<'a> ColumnCache<'a> {
    fn new(data: SearchData<'a>) -> Self {
        Self {
            data,
            crosses: FxHashMap::default(),
        }
    }

    fn ensure(&mut self, c: &CrossFeature) {
        if c.is_original() || self.crosses.contains_key(c) {
            return;
        }
        let t = self.data.train.cross_column(c, &self.data.hash);
        let v = self.data.valid.cross_column(c, &self.data.hash);
        self.crosses.insert(c.clone(), (t, v));
    }

    fn views(&self, members: &[CrossFeature]) -> (DesignView<'_>, DesignView<'_>) {
        let mut train = Vec::with_capacity(members.len());
        let mut valid = Vec::with_capacity(members.len());
        for m in members {
            if m.is_original() {
                let i = m.constituents()[0].index();
                train.push(self.data.train.columns[i].as_slice());
                valid.push(self.data.valid.columns[i].as_slice());
            } else {
                let (t, v) = &self.crosses[m];
                train.push(t.as_slice());
                valid.push(v.as_slice());
            }
        }
        (
            DesignView {
                columns: train,
                labels: &self.data.train.labels,
            },
            DesignView {
                columns: valid,
                labels: &self.data.valid.labels,
            },
        )
    }
}

/// Root state: the original fields and an LR model trained on them.
pub fn initial_state(data: &SearchData<'_>, hyper: &LRHyperParams) -> Result<SearchState> {
    let solution = FeatureSet::originals(data.n_base());
    let n = data.train.n_rows();
    let (model, metric) = train_full(
        &data.train.base_view(),
        &[0..n],
        &data.valid.base_view(),
        solution.members(),
        hyper,
    )?;
    Ok(SearchState {
        solution,
        solution_model: model,
        solution_auc: metric.auc,
        base_auc: metric.auc,
        iteration: 0,
        elapsed: Duration::ZERO,
        history: Vec::new(),
        stop_reason: None,
        candidates_evaluated: 0,
    })
}

pub fn beam_search(
    mut state: SearchState,
    data: &SearchData<'_>,
    config: &TerminationConfig,
    hyper: &LRHyperParams,
    pool: &ThreadPool,
    control: &SearchControl,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<SearchState> {
    config.validate()?;
    let start = Instant::now();
    let offset = state.elapsed;
    let elapsed = || offset + start.elapsed();
    let n_train = data.train.n_rows();
    if n_train == 0 {
        return Err(Error::EmptyTrainingData);
    }
    control.publish(&state);

    let mut cache = BsumCache::new(n_train, data.valid.n_rows());
    let mut columns = ColumnCache::new(*data);
    for c in state.solution.crosses() {
        columns.ensure(c);
    }

    let stop = loop {
        if control.is_interrupted() {
            break StopReason::Interrupted;
        }
        if config
            .max_cross_features
            .is_some_and(|max| state.solution.crosses().len() >= max)
        {
            break StopReason::MaxFeatures;
        }
        if config.max_runtime().is_some_and(|max| elapsed() >= max) {
            break StopReason::MaxRuntime;
        }
        let candidates = candidate_crosses(&state.solution);
        if candidates.is_empty() {
            break StopReason::NoChildren;
        }
        let n_cand = candidates.len();

        let partition = partition_blocks(n_train, n_cand, &data.block_rule)?;
        let scheduled = halving_budget(n_cand).max(1).min(partition.block_count());
        {
            let (tv, vv) = columns.views(state.solution.members());
            cache.update(
                &state.solution_model,
                state.solution.members(),
                &tv,
                &partition.ranges[..scheduled],
                &vv,
            )?;
        }
        let input = SmbgdInput {
            train: data.train,
            valid: data.valid,
            hash: &data.hash,
            partition: &partition,
            bsum: &cache,
            hyper,
        };
        let arms = candidates.into_iter().map(CandidateArm::new).collect();
        let outcome = smbgd(arms, &input, pool)?;
        state.candidates_evaluated += n_cand;
        if control.is_interrupted() {
            break StopReason::Interrupted;
        }

        let winner = outcome.winner.cross;
        columns.ensure(&winner);
        let next = state.solution.with(winner.clone());
        let (tv, vv) = columns.views(next.members());
        let retrained = match train_full(&tv, &[0..n_train], &vv, next.members(), hyper) {
            Ok(fit) => Some(fit),
            Err(Error::Diverged) => None,
            Err(e) => return Err(e),
        };
        let new_auc = retrained.as_ref().map_or(f64::NEG_INFINITY, |(_, m)| m.auc);
        let degraded = new_auc < state.solution_auc;
        let accept = retrained.is_some() && !(degraded && config.performance_guard);
        state.iteration += 1;
        if accept {
            let (model, metric) = retrained.unwrap();
            state.solution = next;
            state.solution_model = model;
            state.solution_auc = metric.auc;
            control.publish(&state);
        }
        state.elapsed = elapsed();
        let record = IterationRecord {
            iteration: state.iteration,
            elapsed_secs: state.elapsed.as_secs_f64(),
            candidates: n_cand,
            winner: winner.display_name(data.names),
            validation_auc: new_auc,
            accepted: accept,
            solution_auc: state.solution_auc,
        };
        log::info!(
            "iteration {}: {} candidates, winner {} (AUC {:.5}){}",
            record.iteration,
            record.candidates,
            record.winner,
            record.validation_auc,
            if accept { "" } else { ", rejected" }
        );
        progress(&record);
        state.history.push(record);
        if !accept {
            break StopReason::PerformanceDegraded;
        }
    };
    state.elapsed = elapsed();
    state.stop_reason = Some(stop);
    log::info!("search stopped: {stop:?}");
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xor_data(n: usize, seed: u64) -> EncodedData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<u32>> = (0..3).map(|_| (0..n).map(|_| rng.random_range(0..2)).collect()).collect();
        let labels = (0..n)
            .map(|r| {
                let y = columns[0][r] ^ columns[1][r];
                u8::from(rng.random_bool(if y == 1 { 0.9 } else { 0.1 }))
            })
            .collect();
        EncodedData { columns, labels }
    }

    struct Fixture {
        train: EncodedData,
        valid: EncodedData,
        names: Vec<String>,
    }

    impl Fixture {
        fn new() -> Self {
            Self {
                train: xor_data(3000, 1),
                valid: xor_data(1000, 2),
                names: vec!["a".into(), "b".into(), "c".into()],
            }
        }

        fn data(&self) -> SearchData<'_> {
            SearchData {
                train: &self.train,
                valid: &self.valid,
                hash: HashConfig::new(1 << 12, 5).unwrap(),
                block_rule: BlockRule::default(),
                names: &self.names,
            }
        }
    }

    fn hyper() -> LRHyperParams {
        LRHyperParams {
            alpha: 0.2,
            batch_size: 32,
            epochs: 3,
            ..LRHyperParams::default()
        }
    }

    fn pool() -> ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap()
    }

    #[test]
    fn zero_cross_budget_returns_root() {
        let f = Fixture::new();
        let data = f.data();
        let root = initial_state(&data, &hyper()).unwrap();
        let config = TerminationConfig {
            max_cross_features: Some(0),
            ..TerminationConfig::default()
        };
        let out = beam_search(root.clone(), &data, &config, &hyper(), &pool(), &SearchControl::new(), &mut |_| {})
            .unwrap();
        assert_eq!(out.stop_reason, Some(StopReason::MaxFeatures));
        assert_eq!(out.solution, root.solution);
        assert_eq!(out.iteration, 0);
    }

    #[test]
    fn finds_the_xor_cross() {
        let f = Fixture::new();
        let data = f.data();
        let root = initial_state(&data, &hyper()).unwrap();
        let config = TerminationConfig {
            max_cross_features: Some(1),
            ..TerminationConfig::default()
        };
        let mut seen = Vec::new();
        let out = beam_search(root, &data, &config, &hyper(), &pool(), &SearchControl::new(), &mut |r| {
            seen.push(r.clone())
        })
        .unwrap();
        assert_eq!(out.stop_reason, Some(StopReason::MaxFeatures));
        assert_eq!(out.solution.crosses(), &[CrossFeature::from_indices(&[0, 1]).unwrap()]);
        assert!(out.solution_auc > out.base_auc + 0.2);
        assert_eq!(seen, out.history);
        assert_eq!(seen[0].winner, "a*b");
        assert_eq!(out.candidates_evaluated, 3);
    }

    #[test]
    fn guard_never_lowers_the_solution_auc() {
        let f = Fixture::new();
        let data = f.data();
        let root = initial_state(&data, &hyper()).unwrap();
        let out = beam_search(
            root,
            &data,
            &TerminationConfig::default(),
            &hyper(),
            &pool(),
            &SearchControl::new(),
            &mut |_| {},
        )
        .unwrap();
        let mut prev = out.base_auc;
        for r in &out.history {
            assert!(r.solution_auc >= prev);
            prev = r.solution_auc;
        }
        assert_eq!(out.solution_auc, prev);
        assert!(out.stop_reason.is_some());
    }

    #[test]
    fn interrupt_before_start() {
        let f = Fixture::new();
        let data = f.data();
        let root = initial_state(&data, &hyper()).unwrap();
        let control = SearchControl::new();
        assert!(control.interrupt().is_none());
        let out = beam_search(root.clone(), &data, &TerminationConfig::default(), &hyper(), &pool(), &control, &mut |_| {})
            .unwrap();
        assert_eq!(out.stop_reason, Some(StopReason::Interrupted));
        assert_eq!(out.solution, root.solution);
        let a = control.interrupt().unwrap();
        let b = control.interrupt().unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.solution_auc.to_bits(), b.solution_auc.to_bits());
        assert_eq!(a.solution_model, out.solution_model);
    }

    #[test]
    fn interrupt_from_progress_keeps_last_adoption() {
        let f = Fixture::new();
        let data = f.data();
        let root = initial_state(&data, &hyper()).unwrap();
        let control = SearchControl::new();
        let handle = control.clone();
        let config = TerminationConfig {
            performance_guard: false,
            max_cross_features: Some(3),
            ..TerminationConfig::default()
        };
        let out = beam_search(root, &data, &config, &hyper(), &pool(), &control, &mut |_| {
            handle.interrupt();
        })
        .unwrap();
        assert_eq!(out.stop_reason, Some(StopReason::Interrupted));
        assert_eq!(out.iteration, 1);
        assert_eq!(control.snapshot().unwrap().solution, out.solution);
    }
}
