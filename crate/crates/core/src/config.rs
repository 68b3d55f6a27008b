//! Run configuration, read from JSON. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::HashConfig;
use crate::lr::LRHyperParams;
use crate::search::TerminationConfig;
use crate::tabular::BlockRule;

pub const DEFAULT_BUCKET_COUNT: u32 = 1 << 18;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_FULL_EPOCHS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub validation_fraction: f64,
    pub termination: TerminationConfig,
    pub bucket_count: u32,
    /// Discretization granularities; chosen from the row count when absent.
    pub granularity_levels: Option<Vec<u32>>,
    pub block_rule: BlockRule,
    pub expert: ExpertConfig,
}

/// Settings normally left alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    /// Mini-batch size for every SGD run (default 256).
    pub batch_size: Option<usize>,
    /// Fixed LR hyper-parameters; skips the tuning grid.
    pub hyper: Option<LRHyperParams>,
    /// SGD passes for every all-field fit (tuning, the base model and the
    /// retrain after each adoption).
    pub epochs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            validation_fraction: 0.2,
            termination: TerminationConfig::default(),
            bucket_count: DEFAULT_BUCKET_COUNT,
            granularity_levels: None,
            block_rule: BlockRule::default(),
            expert: ExpertConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if HashConfig::new(self.bucket_count, self.seed).is_err() {
            return bad(format!("bucket_count must be a power of two >= 2, got {}", self.bucket_count));
        }
        if let Some(levels) = &self.granularity_levels {
            if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("granularity_levels must be positive and increasing, got {levels:?}"));
            }
        }
        if self.block_rule.small_multiplier == 0 || self.block_rule.large_multiplier == 0 {
            return bad("block_rule multipliers must be at least 1".into());
        }
        if self.expert.batch_size == Some(0) {
            return bad("expert.batch_size must be at least 1".into());
        }
        if self.expert.epochs == Some(0) {
            return bad("expert.epochs must be at least 1".into());
        }
        if let Some(h) = &self.expert.hyper {
            h.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.termination.validate()
    }

    pub fn hash(&self) -> HashConfig {
        HashConfig {
            bucket_count: self.bucket_count,
            seed: self.seed,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.expert.batch_size.unwrap_or(crate::lr::DEFAULT_BATCH_SIZE)
    }

    pub fn epochs(&self) -> usize {
        self.expert.epochs.unwrap_or(DEFAULT_FULL_EPOCHS)
    }
}
