use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use trustal_bench::{acquisition_fixture, history_fixture};
use trustal_core::acquisition::{self, AcquisitionRequest, Strategy};
use trustal_core::data::{DataSource, DatasetSpec, SplitFractions};
use trustal_core::engine::{self, DistillScope, Mode, RunConfig};
use trustal_core::model::{Arch, TrainConfig};
use trustal_core::teacher::{select_nc, ModelSnapshot, SnapshotStore};
use trustal_core::ModelParams;

fn bench_acquisition(c: &mut Criterion) {
    let (dataset, pool, model) = acquisition_fixture(2000, 100);
    let mut group = c.benchmark_group("acquisition");
    for strategy in [Strategy::Conf, Strategy::Coreset, Strategy::Badge] {
        group.bench_function(strategy.to_string(), |b| {
            b.iter(|| {
                let req = AcquisitionRequest {
                    model: &model,
                    dataset: &dataset,
                    pool: &pool,
                    k: 32,
                    seed: 3,
                };
                black_box(acquisition::select(strategy, &req).unwrap())
            });
        });
    }
    group.finish();
}

fn bench_consistency(c: &mut Criterion) {
    let matrix = history_fixture(30, 500);
    c.bench_function("mci_t30_m500", |b| {
        b.iter(|| black_box(matrix.mci(29).unwrap()));
    });
    c.bench_function("pairwise_consistency_t30_m500", |b| {
        b.iter(|| black_box(matrix.mean_pairwise_correct_consistency().unwrap()));
    });
}

fn bench_teacher_selection(c: &mut Criterion) {
    let matrix = history_fixture(20, 500);
    let mut store = SnapshotStore::new();
    for g in 0..20 {
        store
            .push(ModelSnapshot {
                generation: g,
                params: ModelParams::zeros(Arch::Linear, 2, 0, 2).unwrap(),
                dev_acc: matrix.row(g).unwrap().to_vec(),
                dev_preds: matrix.preds_row(g).unwrap().to_vec(),
                val_accuracy: matrix.accuracy(g).unwrap(),
            })
            .unwrap();
    }
    let ci: Vec<f64> = (0..500).map(|i| (i % 7) as f64).collect();
    c.bench_function("nc_selection_20gen_m500", |b| {
        b.iter(|| black_box(select_nc(&store, &ci).unwrap().generation));
    });
}

fn bench_round_loop(c: &mut Criterion) {
    let config = RunConfig {
        dataset: DatasetSpec {
            name: "bench".into(),
            dim: 6,
            classes: 3,
            source: DataSource::Synth { n: 400, sep: 3.0 },
            split: SplitFractions::default(),
        },
        strategy: Strategy::Badge,
        mode: Mode::TrustalNc,
        rounds: 4,
        initial_fraction: 0.05,
        per_round_fraction: 0.05,
        train: TrainConfig { arch: Arch::Linear, epochs: 5, learning_rate: 0.05, ..TrainConfig::default() },
        distill_scope: DistillScope::All,
        noise: None,
        seeds: vec![1],
        phase_boundary_override: None,
    };
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    group.bench_function("nc_run_4_rounds", |b| {
        b.iter(|| black_box(engine::run_single(&config, 1).unwrap()));
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_acquisition,
    bench_consistency,
    bench_teacher_selection,
    bench_round_loop
);
criterion_main!(benches);
