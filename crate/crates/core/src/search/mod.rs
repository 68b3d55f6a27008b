//! Greedy beam search over feature sets with successive-halving candidate
//! evaluation, termination rules and cooperative interruption.

pub mod beam;
pub mod smbgd;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, PoisonError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::lr::LRModel;

pub use beam::{beam_search, initial_state, SearchData};
pub use smbgd::{smbgd, CandidateArm, RoundRecord, SmbgdInput, SmbgdOutcome};

/// When to stop adopting crosses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminationConfig {
    pub max_runtime_secs: Option<f64>,
    pub max_cross_features: Option<usize>,
    /// Stop (and revert the adoption) when the retrained model's validation
    /// AUC drops.
    pub performance_guard: bool,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self {
            max_runtime_secs: None,
            max_cross_features: None,
            performance_guard: true,
        }
    }
}

impl TerminationConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.max_runtime_secs {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("max_runtime_secs must be finite and >= 0, got {s}")));
            }
        }
        if !self.performance_guard && self.max_runtime_secs.is_none() && self.max_cross_features.is_none() {
            return Err(Error::Config(
                "with performance_guard off, set max_runtime_secs or max_cross_features".into(),
            ));
        }
        Ok(())
    }

    pub fn max_runtime(&self) -> Option<Duration> {
        self.max_runtime_secs.map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxFeatures,
    MaxRuntime,
    PerformanceDegraded,
    NoChildren,
    Interrupted,
}

/// One beam iteration, also emitted as a progress line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub elapsed_secs: f64,
    pub candidates: usize,
    pub winner: String,
    /// Validation AUC of the model retrained with the winner adopted.
    pub validation_auc: f64,
    pub accepted: bool,
    /// Validation AUC of the solution after this iteration.
    pub solution_auc: f64,
}

#[derive(Debug, Clone)]
pub struct SearchState {
    pub solution: FeatureSet,
    pub solution_model: LRModel,
    pub solution_auc: f64,
    /// Validation AUC of the original-features model.
    pub base_auc: f64,
    pub iteration: usize,
    pub elapsed: Duration,
    pub history: Vec<IterationRecord>,
    pub stop_reason: Option<StopReason>,
    pub candidates_evaluated: usize,
}

/// Last adopted solution, kept for interrupt snapshots.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub solution: FeatureSet,
    pub solution_model: LRModel,
    pub solution_auc: f64,
}

/// Shared handle for stopping a running search from another thread.
#[derive(Debug, Clone, Default)]
pub struct SearchControl {
    flag: Arc<AtomicBool>,
    snapshot: Arc<Mutex<Option<Snapshot>>>,
}

impl SearchControl {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ask the search to stop at the next iteration boundary and return the
    /// last adopted solution (None before the search has started).
    pub fn interrupt(&self) -> Option<Snapshot> {
        self.flag.store(true, Ordering::SeqCst);
        self.snapshot()
    }

    pub fn is_interrupted(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }

    /// The raw flag, for wiring into signal handlers.
    pub fn flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.flag)
    }

    pub fn snapshot(&self) -> Option<Snapshot> {
        self.snapshot.lock().unwrap_or_else(PoisonError::into_inner).clone()
    }

    pub(crate) fn publish(&self, state: &SearchState) {
        *self.snapshot.lock().unwrap_or_else(PoisonError::into_inner) = Some(Snapshot {
            solution: state.solution.clone(),
            solution_model: state.solution_model.clone(),
            solution_auc: state.solution_auc,
        });
    }
}
