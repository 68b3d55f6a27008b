//! Exported feature producer: the serialized pipeline and its fast
//! transform + predict path.

pub mod artifact;
pub mod runtime;

pub use artifact::{ArtifactMetadata, ProducerArtifact, FORMAT_VERSION, MAGIC};
pub use runtime::{bench_latency, LatencyReport, Producer, Scratch};
