//! Post-hoc acquisition-quality metrics and cross-run comparison.
//!
//! Uncertainty quality scores each round's selections by their Shannon
//! entropy under a reference model trained on the full training pool;
//! diversity quality scores them by the entropy of their cluster
//! distribution after k-means over the reference embeddings. All entropies
//! use the natural log.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use crate::cluster::{kmeans, ClusterAssignment};

use crate::data::{Dataset, PoolState, SampleId};
use crate::engine::RunReport;
use crate::error::{Error, Result};
use crate::model::{self, ModelParams, TrainConfig};

/// Classifier trained on the entire training pool, with its embeddings of
/// every train sample.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub params: ModelParams,
    pub train_ids: Vec<SampleId>,
    pub embeddings: Vec<Vec<f64>>,
    row_of: HashMap<SampleId, usize>,
}

impl ReferenceModel {
    pub fn embedding(&self, id: SampleId) -> Option<&[f64]> {
        self.row_of.get(&id).map(|&row| self.embeddings[row].as_slice())
    }
}

/// Train the reference model: every train id labeled with its true label,
/// best-validation-epoch checkpointing as in the round loop.
pub fn train_reference(
    dataset: &Dataset,
    pool: &PoolState,
    config: &TrainConfig,
    seed: u64,
) -> Result<ReferenceModel> {
    let train_ids: Vec<SampleId> =
        pool.labeled.union(&pool.unlabeled).copied().collect::<BTreeSet<_>>().into_iter().collect();
    if train_ids.is_empty() {
        return Err(Error::Analysis("empty training pool".into()));
    }
    let full = PoolState {
        labeled: train_ids.iter().copied().collect(),
        unlabeled: BTreeSet::new(),
        dev: pool.dev.clone(),
        test: pool.test.clone(),
        observed: train_ids.iter().map(|&id| (id, dataset.true_label(id))).collect(),
    };
    let mut cfg = config.clone();
    cfg.seed = seed;
    let outcome = model::train(dataset, &full, &cfg, None)?;
    let embeddings: Vec<Vec<f64>> = train_ids
        .iter()
        .map(|&id| Ok(outcome.params.forward(dataset.features(id))?.penult))
        .collect::<Result<_>>()?;
    let row_of = train_ids.iter().copied().enumerate().map(|(row, id)| (id, row)).collect();
    Ok(ReferenceModel { params: outcome.params, train_ids, embeddings, row_of })
}

/// Shannon entropy of a probability vector in nats; zero entries
/// contribute nothing.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// Per-round mean entropy of the selected samples under the reference
/// model. Higher means the round acquired more uncertain samples.
pub fn uncertainty_quality(
    reference: &ReferenceModel,
    dataset: &Dataset,
    selected_per_round: &[Vec<SampleId>],
) -> Result<Vec<f64>> {
    selected_per_round
        .iter()
        .map(|ids| {
            if ids.is_empty() {
                return Err(Error::Analysis("empty selection".into()));
            }
            let mut total = 0.0;
            for &id in ids {
                let probs = reference.params.forward(dataset.features(id))?.probs;
                total += shannon_entropy(&probs);
            }
            Ok(total / ids.len() as f64)
        })
        .collect()
}

/// Per-round entropy of the cluster distribution of the selected samples,
/// given a clustering of the full train embeddings. `ln k` when the
/// selections spread uniformly over the clusters, 0 when they collapse
/// into one.
pub fn diversity_quality(
    reference: &ReferenceModel,
    clusters: &ClusterAssignment,
    selected_per_round: &[Vec<SampleId>],
) -> Result<Vec<f64>> {
    selected_per_round
        .iter()
        .map(|ids| {
            if ids.is_empty() {
                return Err(Error::Analysis("empty selection".into()));
            }
            let mut counts: HashMap<usize, usize> = HashMap::new();
            for &id in ids {
                let row = reference
                    .row_of
                    .get(&id)
                    .ok_or_else(|| Error::Analysis(format!("id {id} is not a train sample")))?;
                *counts.entry(clusters.assignment[*row]).or_insert(0) += 1;
            }
            let n = ids.len() as f64;
            let dist: Vec<f64> = counts.values().map(|&c| c as f64 / n).collect();
            Ok(shannon_entropy(&dist))
        })
        .collect()
}

/// Mean test accuracy over the last three rounds (fewer when the run is
/// shorter): the plateau a converged run settles at.
pub fn plateau_accuracy(report: &RunReport) -> f64 {
    let accs = report.test_accuracy_series();
    let tail = accs.len().saturating_sub(3);
    let window = &accs[tail..];
    window.iter().sum::<f64>() / window.len() as f64
}

/// First round whose test accuracy reaches `target`, if any.
pub fn rounds_to_threshold(report: &RunReport, target: f64) -> Option<usize> {
    report.rounds.iter().find(|r| r.test_accuracy >= target).map(|r| r.round)
}

/// One run's per-phase means and deltas against the designated baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub stable_accuracy: f64,
    pub stable_mci: f64,
    pub saturated_accuracy: Option<f64>,
    pub saturated_mci: Option<f64>,
    pub delta_stable_accuracy: f64,
    pub delta_stable_mci: f64,
    pub delta_saturated_accuracy: Option<f64>,
    pub delta_saturated_mci: Option<f64>,
    /// First round reaching the threshold fraction of the baseline
    /// plateau accuracy.
    pub rounds_to_threshold: Option<usize>,
}

/// Cross-run comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub threshold_fraction: f64,
    pub baseline_plateau: f64,
    pub target_accuracy: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Compare finished runs over the same dataset against `reports[baseline]`.
/// Labels are `mode/strategy/seed`.
pub fn compare_runs(
    reports: &[RunReport],
    baseline: usize,
    threshold_fraction: f64,
) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::Comparison(format!("need at least 2 reports, got {}", reports.len())));
    }
    if baseline >= reports.len() {
        return Err(Error::Comparison(format!("baseline index {baseline} out of range")));
    }
    let base = &reports[baseline];
    for report in reports {
        if report.dataset != base.dataset {
            return Err(Error::Comparison(format!(
                "dataset mismatch: `{}` vs `{}`",
                report.dataset.name, base.dataset.name
            )));
        }
    }
    let baseline_plateau = plateau_accuracy(base);
    let target = threshold_fraction * baseline_plateau;
    let rows = reports
        .iter()
        .map(|report| {
            let p = &report.phases;
            let b = &base.phases;
            ComparisonRow {
                label: format!("{}/{}/{}", report.mode, report.strategy, report.seed),
                stable_accuracy: p.stable_accuracy,
                stable_mci: p.stable_mci,
                saturated_accuracy: p.saturated_accuracy,
                saturated_mci: p.saturated_mci,
                delta_stable_accuracy: p.stable_accuracy - b.stable_accuracy,
                delta_stable_mci: p.stable_mci - b.stable_mci,
                delta_saturated_accuracy: p
                    .saturated_accuracy
                    .zip(b.saturated_accuracy)
                    .map(|(a, bb)| a - bb),
                delta_saturated_mci: p.saturated_mci.zip(b.saturated_mci).map(|(a, bb)| a - bb),
                rounds_to_threshold: rounds_to_threshold(report, target),
            }
        })
        .collect();
    Ok(Comparison {
        baseline: format!("{}/{}/{}", base.mode, base.strategy, base.seed),
        threshold_fraction,
        baseline_plateau,
        target_accuracy: target,
        rows,
    })
}
