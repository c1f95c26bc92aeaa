//! Cross-module integration checks: end-to-end training quality on
//! separable data, full engine runs, and the alpha = 0 equivalence between
//! distilled and baseline loops.

use std::collections::BTreeSet;

use trustal_core::data::{split_pools, synth_blobs, DataSource, DatasetSpec, SplitFractions};
use trustal_core::engine::{self, DistillScope, Mode, NoiseConfig, NoiseStart, RunConfig};
use trustal_core::model::{self, Arch, TrainConfig};
use trustal_core::{Dataset, PoolState, Strategy};

fn fully_labeled(dataset: &Dataset, pool: &PoolState) -> PoolState {
    let ids: Vec<_> = pool.unlabeled.iter().copied().collect();
    pool.acquire(dataset, &ids).unwrap()
}

#[test]
fn widely_separated_blobs_train_to_high_accuracy() {
    let samples = synth_blobs(500, 2, 2, 10.0, 3).unwrap();
    let dataset = Dataset::new("blobs", 2, 2, samples).unwrap();
    let split = SplitFractions { train: 0.6, dev: 0.1, test: 0.3 };
    let pool = split_pools(&dataset, split, 3).unwrap();
    let pool = fully_labeled(&dataset, &pool);
    let config = TrainConfig {
        arch: Arch::Linear,
        epochs: 30,
        learning_rate: 0.05,
        seed: 3,
        ..TrainConfig::default()
    };
    let outcome = model::train(&dataset, &pool, &config, None).unwrap();
    let acc = model::test_accuracy(&outcome.params, &dataset, &pool.test).unwrap();
    assert!(acc > 0.95, "test accuracy {acc}");
}

fn pipeline_config(mode: Mode, strategy: Strategy) -> RunConfig {
    RunConfig {
        dataset: DatasetSpec {
            name: "pipeline".into(),
            dim: 4,
            classes: 3,
            source: DataSource::Synth { n: 1000, sep: 5.0 },
            split: SplitFractions::default(),
        },
        strategy,
        mode,
        rounds: 10,
        initial_fraction: 0.02,
        per_round_fraction: 0.02,
        train: TrainConfig {
            arch: Arch::Linear,
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 50,
            alpha: 0.75,
            hidden_dim: 32,
            seed: 0,
        },
        distill_scope: DistillScope::All,
        noise: None,
        seeds: vec![0],
        phase_boundary_override: None,
    }
}

#[test]
fn conf_strategy_pipeline_reaches_085_on_separable_blobs() {
    let out = engine::run_single(&pipeline_config(Mode::Baseline, Strategy::Conf), 5).unwrap();
    let final_acc = out.report.rounds.last().unwrap().test_accuracy;
    assert!(final_acc > 0.85, "final accuracy {final_acc}");
}

/// Round reports with the distillation bookkeeping fields cleared, for
/// comparing a trustal run against the baseline.
fn comparable_rounds(report: &engine::RunReport) -> String {
    let mut value = serde_json::to_value(&report.rounds).unwrap();
    for round in value.as_array_mut().unwrap() {
        let obj = round.as_object_mut().unwrap();
        obj.insert("teacher_generation".into(), serde_json::Value::Null);
        obj.insert("teacher_score".into(), serde_json::Value::Null);
    }
    serde_json::to_string(&value).unwrap()
}

#[test]
fn alpha_zero_distillation_byte_matches_baseline() {
    for mode in [Mode::TrustalMc, Mode::TrustalNc, Mode::TrustalEnsemble] {
        let mut distilled = pipeline_config(mode, Strategy::Random);
        distilled.rounds = 5;
        distilled.train.alpha = 0.0;
        let mut baseline = pipeline_config(Mode::Baseline, Strategy::Random);
        baseline.rounds = 5;
        let a = engine::run_single(&distilled, 11).unwrap();
        let b = engine::run_single(&baseline, 11).unwrap();
        assert_eq!(comparable_rounds(&a.report), comparable_rounds(&b.report), "{mode} diverged");
        assert_eq!(a.final_params, b.final_params);
    }
}

#[test]
fn ensemble_mode_reuses_cached_pseudo_labels() {
    let mut config = pipeline_config(Mode::TrustalEnsemble, Strategy::Random);
    config.rounds = 4;
    let out = engine::run_single(&config, 2).unwrap();
    let ratio = out.report.distill_cache_hit_ratio.unwrap();
    assert!(ratio > 0.0, "ensemble distillation should hit the cache, got {ratio}");
}

#[test]
fn new_only_scope_restricts_distillation_targets() {
    let mut config = pipeline_config(Mode::TrustalMc, Strategy::Random);
    config.rounds = 3;
    config.distill_scope = DistillScope::NewOnly;
    let out = engine::run_single(&config, 4).unwrap();
    // Still a well-formed run; the objective mixes teacher and plain
    // samples within batches.
    assert_eq!(out.report.rounds.len(), 3);
    for round in &out.report.rounds {
        assert_eq!(round.teacher_generation, Some(round.round - 1));
    }
}

#[test]
fn phase_noise_corrupts_only_after_detection_and_is_ledgered() {
    let mut config = pipeline_config(Mode::Baseline, Strategy::Random);
    config.rounds = 12;
    config.noise = Some(NoiseConfig { start: NoiseStart::Phase, ratio: 0.5 });
    let out = engine::run_single(&config, 6).unwrap();
    let k = out.report.budget_per_round;
    let first_corrupted = out.report.rounds.iter().find(|r| !r.corrupted_ids.is_empty());
    if let Some(first) = first_corrupted {
        for round in &out.report.rounds {
            if round.round < first.round {
                assert!(round.corrupted_ids.is_empty());
            } else {
                assert_eq!(round.corrupted_ids.len(), k / 2);
                let acquired: BTreeSet<_> = round.acquired_ids.iter().collect();
                assert!(round.corrupted_ids.iter().all(|id| acquired.contains(id)));
            }
        }
    }
}

#[test]
fn parallel_driver_matches_sequential_runs() {
    let mut config = pipeline_config(Mode::Baseline, Strategy::Random);
    config.rounds = 3;
    config.seeds = vec![1, 2, 3];
    let parallel = engine::run_seeds(&config).unwrap();
    for (i, &seed) in config.seeds.iter().enumerate() {
        let solo = engine::run_single(&config, seed).unwrap();
        assert_eq!(
            serde_json::to_string(&solo.report).unwrap(),
            serde_json::to_string(&parallel[i].report).unwrap()
        );
    }
}
