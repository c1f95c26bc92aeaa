//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustal_core::consistency::AccMatrix;
use trustal_core::data::{split_pools, synth_blobs, SplitFractions};
use trustal_core::model::{Arch, ModelParams};
use trustal_core::{Dataset, PoolState, SampleId};

/// Blob dataset with `labeled` samples already acquired and a trained-ish
/// random model, sized for acquisition benchmarks.
pub fn acquisition_fixture(n: usize, labeled: usize) -> (Dataset, PoolState, ModelParams) {
    let samples = synth_blobs(n, 4, 10, 2.5, 7).expect("fixture data");
    let dataset = Dataset::new("bench", 10, 4, samples).expect("fixture dataset");
    let pool = split_pools(&dataset, SplitFractions::default(), 7).expect("fixture pools");
    let ids: Vec<SampleId> = pool.unlabeled.iter().copied().take(labeled).collect();
    let pool = pool.acquire(&dataset, &ids).expect("fixture acquisition");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = ModelParams::xavier_init(Arch::Mlp1, 10, 32, 4, &mut rng).expect("fixture model");
    (dataset, pool, model)
}

/// Random correctness history of the given shape.
pub fn history_fixture(generations: usize, dev: usize) -> AccMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut matrix = AccMatrix::new((0..dev as u64).collect(), vec![0; dev]).expect("fixture");
    for _ in 0..generations {
        let preds: Vec<usize> = (0..dev).map(|_| usize::from(rng.random::<bool>())).collect();
        matrix.push_row(preds).expect("row");
    }
    matrix
}
