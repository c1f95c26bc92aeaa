//! Snapshot store of predecessor generations, teacher selection, and
//! pseudo-label provisioning with caching.
//!
//! Two selection strategies: the most recent predecessor (monotonic), and
//! the predecessor maximizing the consistency-weighted dev accuracy `g`
//! among candidates strictly older than the acquisition model
//! (non-monotonic). An averaged-ensemble provider exists as a comparison
//! baseline.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// One trained generation: parameters plus its dev-set record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub generation: usize,
    pub params: ModelParams,
    pub dev_acc: Vec<bool>,
    pub dev_preds: Vec<usize>,
    pub val_accuracy: f64,
}

/// Append-only store of generations 0..t, strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStore {
    snapshots: Vec<ModelSnapshot>,
}

impl SnapshotStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, snapshot: ModelSnapshot) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if snapshot.generation <= last.generation {
                return Err(Error::Selection(format!(
                    "generation {} does not follow {}",
                    snapshot.generation, last.generation
                )));
            }
        }
        self.snapshots.push(snapshot);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn latest(&self) -> Option<&ModelSnapshot> {
        self.snapshots.last()
    }

    pub fn get(&self, generation: usize) -> Option<&ModelSnapshot> {
        self.snapshots.iter().find(|s| s.generation == generation)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModelSnapshot> {
        self.snapshots.iter()
    }
}

/// Positive per-sample weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights(Vec<f64>);

impl ImportanceWeights {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Softmax-normalize a correct-inconsistency vector into importance
/// weights (max-shifted for stability). Easily forgettable samples get
/// high weight.
pub fn importance_weights(inconsistency: &[f64]) -> Result<ImportanceWeights> {
    if inconsistency.is_empty() {
        return Err(Error::Argument("empty inconsistency vector".into()));
    }
    let max = inconsistency.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = inconsistency.iter().map(|&c| (c - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ImportanceWeights(exps.into_iter().map(|e| e / total).collect()))
}

/// Consistency-weighted dev accuracy of a candidate teacher:
/// `sum_i w_i * acc_i / m`, in `[0, 1/m]`.
pub fn teacher_score(weights: &ImportanceWeights, candidate_acc: &[bool]) -> Result<f64> {
    let w = weights.values();
    if w.len() != candidate_acc.len() {
        return Err(Error::Shape(format!(
            "{} weights but {} accuracy entries",
            w.len(),
            candidate_acc.len()
        )));
    }
    let weighted: f64 =
        w.iter().zip(candidate_acc).map(|(&wi, &acc)| if acc { wi } else { 0.0 }).sum();
    Ok(weighted / w.len() as f64)
}

/// Monotonic choice: the most recent snapshot.
pub fn select_mc(store: &SnapshotStore) -> Result<&ModelSnapshot> {
    store.latest().ok_or_else(|| Error::Selection("snapshot store is empty".into()))
}

/// Non-monotonic choice: among candidates strictly older than the most
/// recent snapshot (the acquisition model itself is excluded), return the
/// one maximizing the weighted accuracy under `current_inconsistency`,
/// ties going to the most recent. Falls back to the monotonic choice when
/// no eligible candidate exists.
pub fn select_nc<'a>(
    store: &'a SnapshotStore,
    current_inconsistency: &[f64],
) -> Result<&'a ModelSnapshot> {
    if store.is_empty() {
        return Err(Error::Selection("snapshot store is empty".into()));
    }
    let candidates = &store.snapshots[..store.len() - 1];
    if candidates.is_empty() {
        return select_mc(store);
    }
    let weights = importance_weights(current_inconsistency)?;
    let mut best: Option<(&ModelSnapshot, f64)> = None;
    for snapshot in candidates {
        let score = teacher_score(&weights, &snapshot.dev_acc)?;
        if best.is_none_or(|(_, s)| score >= s) {
            best = Some((snapshot, score));
        }
    }
    Ok(best.expect("candidate list is non-empty").0)
}

/// Score table for every eligible candidate, as recorded in the teacher
/// trace.
pub fn score_candidates(
    store: &SnapshotStore,
    current_inconsistency: &[f64],
) -> Result<Vec<(usize, f64)>> {
    if store.len() < 2 {
        return Ok(Vec::new());
    }
    let weights = importance_weights(current_inconsistency)?;
    store.snapshots[..store.len() - 1]
        .iter()
        .map(|s| Ok((s.generation, teacher_score(&weights, &s.dev_acc)?)))
        .collect()
}

/// Averaged-probability teacher over every stored generation.
pub struct EnsembleTeacher<'a> {
    snapshots: &'a [ModelSnapshot],
}

pub fn select_ensemble(store: &SnapshotStore) -> Result<EnsembleTeacher<'_>> {
    if store.is_empty() {
        return Err(Error::Selection("snapshot store is empty".into()));
    }
    Ok(EnsembleTeacher { snapshots: &store.snapshots })
}

impl EnsembleTeacher<'_> {
    /// Arithmetic mean of the member probabilities; a valid distribution
    /// by convexity.
    pub fn probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut mean = vec![0.0; self.snapshots[0].params.classes];
        for snapshot in self.snapshots {
            let out = snapshot.params.forward(x)?;
            for (m, p) in mean.iter_mut().zip(&out.probs) {
                *m += p;
            }
        }
        let n = self.snapshots.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        Ok(mean)
    }
}

/// Memoized `(generation, sample) -> probability vector` map, so repeat
/// teachers only pay forward passes for newly acquired samples.
#[derive(Debug, Clone, Default)]
pub struct PseudoLabelCache {
    map: HashMap<(usize, SampleId), Vec<f64>>,
    hits: u64,
    misses: u64,
}

impl PseudoLabelCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Teacher probabilities for `ids`, computing only cache misses.
    pub fn probs_for(
        &mut self,
        snapshot: &ModelSnapshot,
        ids: &[SampleId],
        dataset: &Dataset,
    ) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            let key = (snapshot.generation, id);
            if let Some(cached) = self.map.get(&key) {
                self.hits += 1;
                out.push(cached.clone());
            } else {
                self.misses += 1;
                let probs = snapshot.params.forward(dataset.features(id))?.probs;
                self.map.insert(key, probs.clone());
                out.push(probs);
            }
        }
        Ok(out)
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hit_ratio(&self) -> Option<f64> {
        let total = self.hits + self.misses;
        (total > 0).then(|| self.hits as f64 / total as f64)
    }
}
