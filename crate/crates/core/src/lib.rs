//! Poisoning attacks against single-linkage behavioral malware clustering.
//!
//! The pipeline embeds behavioral event reports as ℓ2-normalized binary
//! q-gram vectors, clusters them with single-linkage hierarchical
//! clustering, and evaluates six greedy poisoning strategies that inject
//! feature-addition attack points to maximally disturb the clustering of
//! the untainted data.
//!
//! All distance and objective arithmetic is generic over the scalar type
//! via [`Float`] (`f32` or `f64`); the type aliases at the crate root bind
//! the `f64` instantiations used by the experiment harness and the CLI.

pub mod attack;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod hac;
pub mod harness;
pub mod metrics;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Float;

pub use attack::{AttackOptions, AttackTrace, PoisonCandidate, StrategyKind};
pub use dataset::{Report, ReportFormat, ReportSet, SynthConfig};
pub use embedding::{EmbeddedDataset, FeatureSpace, SparseBinaryVector};
pub use hac::{Dendrogram, Partition};
pub use metrics::{MetricsRecord, SoftAssignment};

/// `f64`-backed aliases for the generic core types.
pub type Dendrogram64 = hac::Dendrogram<f64>;
pub type Merge64 = hac::Merge<f64>;
pub type SoftAssignment64 = metrics::SoftAssignment<f64>;
pub type MetricsRecord64 = metrics::MetricsRecord<f64>;
pub type AttackOptions64 = attack::AttackOptions<f64>;
pub type AttackTrace64 = attack::AttackTrace<f64>;
pub type FScores64 = metrics::FScores<f64>;
