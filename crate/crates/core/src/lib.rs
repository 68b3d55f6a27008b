//! Automatic discovery of high-order cross features for tabular data.
//!
//! The pipeline ingests a CSV with a JSON schema, discretizes numerical
//! columns at several granularities, hashes everything into sparse fields and
//! then greedily adopts pair-wise crosses of the current feature set. Each
//! candidate cross is scored by field-wise logistic regression under a
//! successive-halving budget of data blocks. The result is exported as a
//! self-contained artifact that replays the transform and predicts.

pub mod cin_check;
pub mod config;
pub mod error;
pub mod features;
pub mod lr;
pub mod pipeline;
pub mod producer;
pub mod search;
pub mod tabular;

pub use config::RunConfig;

pub use error::{Error, Result};
