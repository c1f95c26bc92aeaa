//! Orchestrates the active-learning loop end to end: seed model, rounds of
//! acquisition, optional teacher selection and distillation, retraining
//! from scratch, and metric recording.

mod config;
mod report;

pub use config::{DistillScope, Mode, NoiseConfig, NoiseStart, RunConfig};
pub use report::{
    detect_phases, moving_average_boundary, phase_averages, PhaseAverages, RoundReport, RunReport,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{self, AcquisitionRequest};
use crate::consistency::AccMatrix;
use crate::data::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::model::{self, TeacherProbs};
use crate::rng;
use crate::teacher::{
    score_candidates, select_ensemble, select_mc, select_nc, ModelSnapshot, PseudoLabelCache,
    SnapshotStore,
};

/// One row of the teacher-selection trace: every candidate scored in a
/// round, with the chosen one marked. Monotonic and fallback choices carry
/// no score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherTraceRow {
    pub round: usize,
    pub candidate_generation: usize,
    pub score: Option<f64>,
    pub chosen: bool,
}

/// Id membership of each pool at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<SampleId>,
    pub dev: Vec<SampleId>,
    pub test: Vec<SampleId>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub acc_matrix: AccMatrix,
    pub teacher_trace: Vec<TeacherTraceRow>,
    pub splits: SplitManifest,
    pub final_params: model::ModelParams,
}

/// A named (config, seed) pair for the parallel driver.
#[derive(Debug, Clone)]
pub struct RunJob {
    pub label: String,
    pub config: RunConfig,
    pub seed: u64,
}

fn budget(fraction: f64, train_total: usize) -> usize {
    ((fraction * train_total as f64).round() as usize).max(1)
}

/// Conventional loop: cross-entropy training only.
pub fn run_baseline(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    if config.mode != Mode::Baseline {
        return Err(Error::Argument(format!("run_baseline requires mode=baseline, got {}", config.mode)));
    }
    run_single(config, seed)
}

/// Distillation loop: each round selects a teacher per the configured
/// mode and trains on the combined objective.
pub fn run_trustal(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    if config.mode == Mode::Baseline {
        return Err(Error::Argument("run_trustal requires a distillation mode".into()));
    }
    run_single(config, seed)
}

/// Label-noise experiment: identical to the configured mode except each
/// round's freshly acquired batch after the noise start point is
/// corrupted before training.
pub fn run_noise_experiment(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    if config.noise.is_none() {
        return Err(Error::Argument("run_noise_experiment requires a noise config".into()));
    }
    run_single(config, seed)
}

/// Execute one run for a single master seed.
pub fn run_single(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    let (dataset, mut pool) = Dataset::from_spec(&config.dataset, seed)?;
    let train_total = pool.train_total();
    let initial = budget(config.initial_fraction, train_total);
    let per_round = budget(config.per_round_fraction, train_total);
    if initial > pool.unlabeled.len() {
        return Err(Error::Argument(format!(
            "initial acquisition of {initial} exceeds the train pool of {train_total}"
        )));
    }
    let splits = SplitManifest {
        train: pool.unlabeled.iter().copied().collect(),
        dev: pool.dev.clone(),
        test: pool.test.clone(),
    };

    let mut matrix = AccMatrix::for_pool(&dataset, &pool)?;
    let mut store = SnapshotStore::new();
    let mut cache = PseudoLabelCache::new();
    let mut trace: Vec<TeacherTraceRow> = Vec::new();

    // Seed generation: random initial acquisition, cross-entropy only.
    let seed_ids = {
        let zeros =
            model::ModelParams::zeros(config.train.arch, dataset.dim, config.train.hidden_dim.max(1), dataset.classes)?;
        let req = AcquisitionRequest {
            model: &zeros,
            dataset: &dataset,
            pool: &pool,
            k: initial,
            seed: rng::derive(seed, "acquire", 0),
        };
        acquisition::random_select(&req)?
    };
    pool = pool.acquire(&dataset, &seed_ids)?;
    let mut train_cfg = config.train.clone();
    train_cfg.seed = rng::derive(seed, "train", 0);
    let outcome = model::train(&dataset, &pool, &train_cfg, None)?;
    matrix.record_generation(&outcome.params, &dataset)?;
    push_snapshot(&mut store, 0, &matrix, outcome.params.clone(), best_val(&outcome))?;
    let seed_val = best_val(&outcome);
    let seed_test = model::test_accuracy(&outcome.params, &dataset, &pool.test)?;

    let mut rounds: Vec<RoundReport> = Vec::new();
    let mut val_history: Vec<f64> = Vec::new();
    let mut truncated = false;

    for round in 1..=config.rounds {
        if pool.unlabeled.len() < per_round {
            truncated = true;
            break;
        }
        let started = Instant::now();
        let acquirer = store.latest().expect("seed generation recorded").params.clone();
        let req = AcquisitionRequest {
            model: &acquirer,
            dataset: &dataset,
            pool: &pool,
            k: per_round,
            seed: rng::derive(seed, "acquire", round as u64),
        };
        let acquired = acquisition::select(config.strategy, &req)?;

        // Teacher selection happens before labeling, on the history so far.
        let choice = select_teacher(config.mode, &store, &matrix, round, &mut trace)?;

        pool = pool.acquire(&dataset, &acquired)?;
        let corrupted = if let Some(noise) = &config.noise {
            if noise_active(noise, round, &val_history) {
                let (next, flipped) = pool.corrupt_labels(
                    &acquired,
                    noise.ratio,
                    dataset.classes,
                    rng::derive(seed, "corrupt", round as u64),
                )?;
                pool = next;
                flipped
            } else {
                Vec::new()
            }
        } else {
            Vec::new()
        };

        let scope_ids: Vec<SampleId> = match config.distill_scope {
            DistillScope::All => pool.labeled.iter().copied().collect(),
            DistillScope::NewOnly => acquired.clone(),
        };
        let teacher_probs = pseudo_labels(&choice, &store, &mut cache, &dataset, &scope_ids)?;

        train_cfg.seed = rng::derive(seed, "train", round as u64);
        let outcome = model::train(&dataset, &pool, &train_cfg, teacher_probs.as_ref())?;
        matrix.record_generation(&outcome.params, &dataset)?;
        let val_accuracy = best_val(&outcome);
        push_snapshot(&mut store, round, &matrix, outcome.params.clone(), val_accuracy)?;

        let (teacher_generation, teacher_score) = match &choice {
            TeacherChoice::None | TeacherChoice::Ensemble => (None, None),
            TeacherChoice::Single { generation, score } => (Some(*generation), *score),
        };
        rounds.push(RoundReport {
            round,
            labeled_fraction: pool.labeled.len() as f64 / train_total as f64,
            test_accuracy: model::test_accuracy(&outcome.params, &dataset, &pool.test)?,
            val_accuracy,
            mci: matrix.mci(round)?,
            forgetting_events: matrix.forgetting_events(round - 1, round)?,
            learning_events: matrix.learning_events(round - 1, round)?,
            teacher_generation,
            teacher_score,
            acquired_ids: acquired,
            corrupted_ids: corrupted,
            wall_time_secs: started.elapsed().as_secs_f64(),
        });
        val_history.push(val_accuracy);
    }

    let completed = rounds.len();
    let phase_boundary = config.phase_boundary_override.unwrap_or_else(|| {
        if completed >= 3 { moving_average_boundary(&val_history).unwrap_or(completed) } else { completed }
    });
    let phases = phase_averages(&rounds, phase_boundary);
    let report = RunReport {
        config_hash: config.fingerprint(),
        dataset: config.dataset.clone(),
        mode: config.mode,
        strategy: config.strategy,
        seed,
        budget_per_round: per_round,
        seed_acquired_ids: seed_ids,
        seed_val_accuracy: seed_val,
        seed_test_accuracy: seed_test,
        rounds,
        mean_pairwise_correct_consistency: matrix.mean_pairwise_correct_consistency()?,
        phase_boundary,
        phases,
        truncated,
        distill_cache_hit_ratio: cache.hit_ratio(),
    };
    let final_params = store.latest().expect("at least the seed generation").params.clone();
    Ok(RunOutput { report, acc_matrix: matrix, teacher_trace: trace, splits, final_params })
}

/// Execute every seed in the config, in parallel.
pub fn run_seeds(config: &RunConfig) -> Result<Vec<RunOutput>> {
    use rayon::prelude::*;
    config.validate()?;
    config.seeds.par_iter().map(|&seed| run_single(config, seed)).collect()
}

/// Execute independent jobs on a bounded worker pool.
pub fn run_batch(jobs: Vec<RunJob>, workers: usize) -> Vec<(RunJob, Result<RunOutput>)> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("worker pool");
    pool.install(|| {
        jobs.into_par_iter()
            .map(|job| {
                let result = run_single(&job.config, job.seed);
                (job, result)
            })
            .collect()
    })
}

fn best_val(outcome: &model::TrainOutcome) -> f64 {
    outcome.epoch_val_accuracy[outcome.best_epoch - 1]
}

fn push_snapshot(
    store: &mut SnapshotStore,
    generation: usize,
    matrix: &AccMatrix,
    params: model::ModelParams,
    val_accuracy: f64,
) -> Result<()> {
    store.push(ModelSnapshot {
        generation,
        params,
        dev_acc: matrix.row(generation)?.to_vec(),
        dev_preds: matrix.preds_row(generation)?.to_vec(),
        val_accuracy,
    })
}

enum TeacherChoice {
    None,
    Single { generation: usize, score: Option<f64> },
    Ensemble,
}

fn select_teacher(
    mode: Mode,
    store: &SnapshotStore,
    matrix: &AccMatrix,
    round: usize,
    trace: &mut Vec<TeacherTraceRow>,
) -> Result<TeacherChoice> {
    match mode {
        Mode::Baseline => Ok(TeacherChoice::None),
        Mode::TrustalMc => {
            let snap = select_mc(store)?;
            trace.push(TeacherTraceRow {
                round,
                candidate_generation: snap.generation,
                score: None,
                chosen: true,
            });
            Ok(TeacherChoice::Single { generation: snap.generation, score: None })
        }
        Mode::TrustalNc => {
            if round < 2 {
                // No eligible predecessor older than the acquisition model
                // yet; fall back to the monotonic choice.
                let snap = select_mc(store)?;
                trace.push(TeacherTraceRow {
                    round,
                    candidate_generation: snap.generation,
                    score: None,
                    chosen: true,
                });
                return Ok(TeacherChoice::Single { generation: snap.generation, score: None });
            }
            // The inconsistency vector of the acquisition model, i.e. of
            // generation round-1.
            let ci: Vec<f64> =
                matrix.correct_inconsistency(round - 1)?.into_iter().map(f64::from).collect();
            let chosen = select_nc(store, &ci)?;
            let scored = score_candidates(store, &ci)?;
            let mut chosen_score = None;
            for (generation, score) in scored {
                let is_chosen = generation == chosen.generation;
                if is_chosen {
                    chosen_score = Some(score);
                }
                trace.push(TeacherTraceRow {
                    round,
                    candidate_generation: generation,
                    score: Some(score),
                    chosen: is_chosen,
                });
            }
            Ok(TeacherChoice::Single { generation: chosen.generation, score: chosen_score })
        }
        Mode::TrustalEnsemble => Ok(TeacherChoice::Ensemble),
    }
}

fn pseudo_labels(
    choice: &TeacherChoice,
    store: &SnapshotStore,
    cache: &mut PseudoLabelCache,
    dataset: &Dataset,
    ids: &[SampleId],
) -> Result<Option<TeacherProbs>> {
    match choice {
        TeacherChoice::None => Ok(None),
        TeacherChoice::Single { generation, .. } => {
            let snapshot = store
                .get(*generation)
                .ok_or_else(|| Error::Selection(format!("generation {generation} not stored")))?;
            let probs = cache.probs_for(snapshot, ids, dataset)?;
            Ok(Some(ids.iter().copied().zip(probs).collect()))
        }
        TeacherChoice::Ensemble => {
            let _ = select_ensemble(store)?;
            let mut map = TeacherProbs::new();
            let n = store.len() as f64;
            for snapshot in store.iter() {
                let probs = cache.probs_for(snapshot, ids, dataset)?;
                for (&id, p) in ids.iter().zip(probs) {
                    let entry =
                        map.entry(id).or_insert_with(|| vec![0.0; dataset.classes]);
                    for (acc, v) in entry.iter_mut().zip(p) {
                        *acc += v / n;
                    }
                }
            }
            Ok(Some(map))
        }
    }
}

/// Whether the round's freshly acquired batch gets corrupted. For
/// `Round(r)` starts, every round `t >= r`. For `Phase`, every round after
/// the moving-average rule has fired on the validation accuracies seen so
/// far (detection lags the true boundary by the window lookahead).
fn noise_active(noise: &NoiseConfig, round: usize, val_history: &[f64]) -> bool {
    if noise.ratio == 0.0 {
        return false;
    }
    match noise.start {
        NoiseStart::Round(r) => round >= r,
        NoiseStart::Phase => moving_average_boundary(val_history).is_some(),
    }
}
