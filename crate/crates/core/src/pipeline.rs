//! End-to-end fit: split, fill, discretize, encode, tune, search, export.

use std::time::Instant;

use rayon::ThreadPool;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{
    bin_index, discretize_multi_granularity, encode_table, filter_granularities, hash_bin, levels_for_rows,
    BaseField, BaseFieldId, BaseSource, DiscretizationSpec, EncodedData, FeatureSet, GranularityCandidate,
    HashConfig, NumericBinning,
};
use crate::lr::{tune_hyperparams, LRHyperParams, TuneGrid, TuneOutcome};
use crate::producer::{ArtifactMetadata, ProducerArtifact};
use crate::search::{beam_search, initial_state, IterationRecord, SearchControl, SearchData, SearchState};
use crate::tabular::{partition_blocks, split_indices, FillRules, RawColumn, RawTable};

/// Encoded training and validation splits with everything needed to replay
/// the encoding.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub fill_rules: FillRules,
    pub discretization: DiscretizationSpec,
    pub hash: HashConfig,
    pub base_fields: Vec<BaseField>,
    pub train: EncodedData,
    pub valid: EncodedData,
}

impl Prepared {
    pub fn names(&self) -> Vec<String> {
        self.base_fields.iter().map(|b| b.name.clone()).collect()
    }
}

/// Split, fill from training medians, discretize numerical columns and keep
/// the better half of their granularities, then hash every base field.
pub fn prepare(table: &RawTable, config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    if !table.has_labels() {
        return Err(Error::MissingLabel(table.schema.label.clone()));
    }
    let (train_idx, valid_idx) = split_indices(table.n_rows(), config.validation_fraction, config.seed)?;
    let fill_rules = FillRules::fit(table, &train_idx)?;
    let mut filled = table.clone();
    fill_rules.apply(&mut filled);
    let train = filled.select(&train_idx);
    let valid = filled.select(&valid_idx);
    let hash = config.hash();
    let levels = config
        .granularity_levels
        .clone()
        .unwrap_or_else(|| levels_for_rows(train.n_rows()));
    let partition = partition_blocks(train.n_rows(), levels.len(), &config.block_rule)?;
    let probe_hyper = LRHyperParams {
        batch_size: config.batch_size(),
        ..LRHyperParams::default()
    };

    let mut binnings = Vec::new();
    let mut base_fields = Vec::new();
    for (column, def) in table.schema.fields.iter().enumerate() {
        match (&train.columns[column], &valid.columns[column]) {
            (RawColumn::Categorical(_), _) => base_fields.push(BaseField {
                name: def.name.clone(),
                source: BaseSource::Categorical { column },
            }),
            (RawColumn::Numerical(tv), RawColumn::Numerical(vv)) => {
                let tv: Vec<f64> = tv.iter().map(|v| v.expect("filled")).collect();
                let mg = discretize_multi_granularity(&tv, &levels)?;
                let id = BaseFieldId(0);
                let hashed_train: Vec<Vec<u32>> = mg
                    .bins
                    .iter()
                    .map(|bins| bins.iter().map(|&b| hash_bin(id, b, &hash)).collect())
                    .collect();
                let hashed_valid: Vec<Vec<u32>> = mg
                    .levels
                    .iter()
                    .map(|&g| {
                        vv.iter()
                            .map(|v| hash_bin(id, bin_index(v.expect("filled"), mg.min, mg.max, g), &hash))
                            .collect()
                    })
                    .collect();
                let candidates: Vec<GranularityCandidate<'_>> = mg
                    .levels
                    .iter()
                    .zip(hashed_train.iter().zip(&hashed_valid))
                    .map(|(&g, (t, v))| GranularityCandidate {
                        granularity: g,
                        train: t,
                        valid: v,
                    })
                    .collect();
                let kept = filter_granularities(
                    &candidates,
                    &train.labels,
                    &partition.ranges,
                    &valid.labels,
                    &probe_hyper,
                )?;
                log::debug!("{}: kept granularities {kept:?}", def.name);
                for &g in &kept {
                    base_fields.push(BaseField {
                        name: format!("{}@{g}", def.name),
                        source: BaseSource::Binned { column, granularity: g },
                    });
                }
                binnings.push(NumericBinning {
                    column,
                    min: mg.min,
                    max: mg.max,
                    granularities: kept,
                });
            }
            _ => unreachable!("split columns share the schema kinds"),
        }
    }
    let discretization = DiscretizationSpec { columns: binnings };
    let train = encode_table(&train, &base_fields, &discretization, &hash)?;
    let valid = encode_table(&valid, &base_fields, &discretization, &hash)?;
    Ok(Prepared {
        fill_rules,
        discretization,
        hash,
        base_fields,
        train,
        valid,
    })
}

/// Log-grid tuning on the original fields over the whole training split.
pub fn tune(prepared: &Prepared, config: &RunConfig, pool: &ThreadPool) -> Result<TuneOutcome> {
    let grid = TuneGrid {
        batch_size: config.batch_size(),
        epochs: config.epochs(),
        ..TuneGrid::default()
    };
    let originals = FeatureSet::originals(prepared.base_fields.len());
    let n = prepared.train.n_rows();
    pool.install(|| {
        tune_hyperparams(
            &prepared.train.base_view(),
            &[0..n],
            &prepared.valid.base_view(),
            originals.members(),
            &grid,
        )
    })
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub artifact: ProducerArtifact,
    pub state: SearchState,
    pub hyper: LRHyperParams,
    pub tuning: Option<TuneOutcome>,
    pub prepared: Prepared,
    pub elapsed_secs: f64,
}

pub fn fit(
    table: &RawTable,
    config: &RunConfig,
    pool: &ThreadPool,
    control: &SearchControl,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<FitOutput> {
    let start = Instant::now();
    let prepared = prepare(table, config)?;
    log::info!(
        "{} base fields, {} training / {} validation rows",
        prepared.base_fields.len(),
        prepared.train.n_rows(),
        prepared.valid.n_rows()
    );
    let (hyper, tuning) = match config.expert.hyper {
        Some(h) => (
            LRHyperParams {
                batch_size: config.expert.batch_size.unwrap_or(h.batch_size),
                epochs: config.expert.epochs.unwrap_or(h.epochs),
                ..h
            },
            None,
        ),
        None => {
            let outcome = tune(&prepared, config, pool)?;
            (outcome.best, Some(outcome))
        }
    };
    let names = prepared.names();
    let data = SearchData {
        train: &prepared.train,
        valid: &prepared.valid,
        hash: prepared.hash,
        block_rule: config.block_rule,
        names: &names,
    };
    let state = initial_state(&data, &hyper)?;
    log::info!("original-features validation AUC {:.5}", state.solution_auc);
    let state = beam_search(state, &data, &config.termination, &hyper, pool, control, progress)?;
    let metadata = ArtifactMetadata {
        seed: config.seed,
        base_auc: state.base_auc,
        solution_auc: state.solution_auc,
        iterations: state.iteration,
        stop_reason: state.stop_reason.map(|r| {
            serde_json::to_value(r)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        }),
        created_unix: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()),
    };
    let artifact = ProducerArtifact::new(
        table.schema.clone(),
        prepared.fill_rules.clone(),
        prepared.discretization.clone(),
        prepared.hash,
        prepared.base_fields.clone(),
        state.solution.clone(),
        &state.solution_model,
        metadata,
    )?;
    Ok(FitOutput {
        artifact,
        state,
        hyper,
        tuning,
        prepared,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// A rayon pool with `workers` threads (all logical cores when `None`).
pub fn worker_pool(workers: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}
