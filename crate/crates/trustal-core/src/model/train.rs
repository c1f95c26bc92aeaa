//! From-scratch training with mini-batch Adam and best-validation-epoch
//! checkpointing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PoolState, SampleId};
use crate::error::{Error, Result};
use crate::rng;

use super::{grad_batch, Arch, BatchItem, ModelParams};

/// Hyperparameters of one training run. Defaults follow the standard
/// recipe: Adam at 1e-3, 10 epochs, batches of 50, distillation weight
/// 0.75.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Arch,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Preference weight on the distillation term.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Linear,
            hidden_dim: 32,
            learning_rate: 0.001,
            epochs: 10,
            batch_size: 50,
            alpha: 0.75,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Argument("need at least 1 epoch".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::Argument(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Teacher probability vectors keyed by sample id. Samples missing from
/// the map train on cross-entropy only (used when distillation is
/// restricted to newly acquired ids).
pub type TeacherProbs = BTreeMap<SampleId, Vec<f64>>;

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest dev accuracy
    /// (earliest epoch on ties).
    pub params: ModelParams,
    pub epoch_val_accuracy: Vec<f64>,
    /// 1-based index of the selected epoch.
    pub best_epoch: usize,
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(learning_rate: f64, param_len: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
            step: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(theta.len(), grad.len());
        self.step += 1;
        let t = self.step as i32;
        let lr_t =
            self.learning_rate * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            theta[i] -= lr_t * self.m[i] / (self.v[i].sqrt() + self.epsilon);
        }
    }
}

/// Dev-set accuracy of `params` against ground-truth labels.
pub fn dev_accuracy(params: &ModelParams, dataset: &Dataset, dev: &[SampleId]) -> Result<f64> {
    let mut correct = 0usize;
    for &id in dev {
        if params.predict(dataset.features(id))? == dataset.true_label(id) {
            correct += 1;
        }
    }
    Ok(correct as f64 / dev.len() as f64)
}

/// Train a fresh model on the labeled pool.
///
/// Runs `config.epochs` of seeded mini-batch Adam on the mean objective
/// (cross-entropy on observed labels, plus `alpha * KL` against any teacher
/// vectors supplied), evaluating dev accuracy after every epoch and
/// returning the best-epoch snapshot. Initialization and batch order come
/// from independent streams of `config.seed`, so two calls with the same
/// inputs are bit-identical.
pub fn train(
    dataset: &Dataset,
    pool: &PoolState,
    config: &TrainConfig,
    teacher: Option<&TeacherProbs>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if pool.labeled.is_empty() {
        return Err(Error::Training("labeled pool is empty".into()));
    }
    if pool.dev.is_empty() {
        return Err(Error::Training("dev split is empty".into()));
    }
    let mut ids: Vec<SampleId> = pool.labeled.iter().copied().collect();
    let mut init_rng = rng::stream(config.seed, "init", 0);
    let mut params = ModelParams::xavier_init(
        config.arch,
        dataset.dim,
        config.hidden_dim,
        dataset.classes,
        &mut init_rng,
    )?;
    let mut batch_rng = rng::stream(config.seed, "batch", 0);
    let mut adam = Adam::new(config.learning_rate, params.param_len());

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut epoch_val_accuracy = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        ids.shuffle(&mut batch_rng);
        for chunk in ids.chunks(config.batch_size) {
            let grad = batched_gradient(&params, dataset, pool, chunk, teacher, config.alpha)?;
            adam.step(&mut params.theta, &grad);
        }
        let val = dev_accuracy(&params, dataset, &pool.dev)?;
        epoch_val_accuracy.push(val);
        if best.as_ref().is_none_or(|(top, _, _)| val > *top) {
            best = Some((val, epoch, params.clone()));
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { params: best_params, epoch_val_accuracy, best_epoch })
}

/// Gradient of the mean objective over one chunk of ids. The chunk may mix
/// samples with and without teacher vectors; each group goes through
/// `grad_batch` separately and the results combine weighted by count,
/// which equals the gradient of the mean over the whole chunk.
fn batched_gradient(
    params: &ModelParams,
    dataset: &Dataset,
    pool: &PoolState,
    chunk: &[SampleId],
    teacher: Option<&TeacherProbs>,
    alpha: f64,
) -> Result<Vec<f64>> {
    let mut with: Vec<BatchItem> = Vec::new();
    let mut without: Vec<BatchItem> = Vec::new();
    for &id in chunk {
        let label = pool
            .observed_label(id)
            .ok_or_else(|| Error::Training(format!("labeled id {id} has no observed label")))?;
        let features = dataset.features(id);
        match teacher.and_then(|map| map.get(&id)) {
            Some(probs) => with.push(BatchItem { features, label, teacher: Some(probs) }),
            None => without.push(BatchItem { features, label, teacher: None }),
        }
    }
    match (with.is_empty(), without.is_empty()) {
        (true, false) => grad_batch(params, &without, alpha),
        (false, true) => grad_batch(params, &with, alpha),
        (false, false) => {
            let g1 = grad_batch(params, &with, alpha)?;
            let g2 = grad_batch(params, &without, alpha)?;
            let (n1, n2) = (with.len() as f64, without.len() as f64);
            let total = n1 + n2;
            Ok(g1
                .iter()
                .zip(&g2)
                .map(|(a, b)| (a * n1 + b * n2) / total)
                .collect())
        }
        (true, true) => Err(Error::Training("empty batch chunk".into())),
    }
}

/// Test-set accuracy of `params` against ground-truth labels.
pub fn test_accuracy(params: &ModelParams, dataset: &Dataset, test: &[SampleId]) -> Result<f64> {
    dev_accuracy(params, dataset, test)
}
