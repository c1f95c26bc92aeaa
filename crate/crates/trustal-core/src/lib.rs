//! Consistency-aware active learning at desk scale.
//!
//! Pool-based active learning where each round can distill knowledge from
//! a selected predecessor model, with full instrumentation of forgetting
//! events, correct inconsistency and acquisition quality.
//!
//! Layout:
//! - [`data`]: datasets, pool partitions, label corruption;
//! - [`model`]: small classifiers, the CE + alpha*KL objective, Adam;
//! - [`acquisition`]: random / least-confidence / k-center / gradient-
//!   embedding strategies;
//! - [`consistency`]: the dev-set correctness ledger and its metrics;
//! - [`teacher`]: snapshot store, teacher selection, pseudo-label cache;
//! - [`engine`]: the round loop, phase detection, the noise experiment;
//! - [`analysis`]: acquisition-quality metrics and cross-run comparison.

pub mod acquisition;
pub mod analysis;
pub mod cluster;
pub mod consistency;
pub mod data;
pub mod engine;
pub mod error;
pub mod model;
pub mod rng;
pub mod teacher;

pub use acquisition::{AcquisitionRequest, Strategy};
pub use consistency::AccMatrix;
pub use data::{Dataset, DatasetSpec, PoolState, Sample, SampleId};
pub use engine::{Mode, RoundReport, RunConfig, RunOutput, RunReport};
pub use error::{Error, Result};
pub use model::{Arch, ModelParams, TrainConfig};
pub use teacher::{ModelSnapshot, PseudoLabelCache, SnapshotStore};
