//! Datasets, pool partitions and acquisition bookkeeping.
//!
//! A [`Dataset`] owns the feature vectors and ground-truth labels. A
//! [`PoolState`] is a value describing which ids are labeled, unlabeled,
//! or held out in the dev/test splits; operations return new states so a
//! pool can be shared read-only across parallel runs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Identifier of a sample within a dataset.
pub type SampleId = u64;

/// One data point: dense features plus its oracle label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub features: Vec<f64>,
    pub true_label: usize,
}

/// Fractions of the dataset assigned to train/dev/test at load time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, dev: 0.1, test: 0.1 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        for f in [self.train, self.dev, self.test] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Argument(format!("split fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.dev + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Gaussian blobs generated on the fly.
    Synth { n: usize, sep: f64 },
    /// CSV file with header `id,label,f1..fd`.
    Csv { path: String },
}

/// Full description of a dataset: shape, source and split policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub dim: usize,
    pub classes: usize,
    pub source: DataSource,
    pub split: SplitFractions,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Argument(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.dim == 0 {
            return Err(Error::Argument("dimensionality must be at least 1".into()));
        }
        self.split.validate()
    }
}

/// Immutable sample storage with id lookup.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub dim: usize,
    pub classes: usize,
    samples: Vec<Sample>,
    index: HashMap<SampleId, usize>,
}

impl Dataset {
    pub fn new(name: &str, dim: usize, classes: usize, samples: Vec<Sample>) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (pos, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::Dimension { expected: dim, got: s.features.len() });
            }
            if s.true_label >= classes {
                return Err(Error::Label { label: s.true_label, classes });
            }
            if index.insert(s.id, pos).is_some() {
                return Err(Error::Argument(format!("duplicate sample id {}", s.id)));
            }
        }
        Ok(Self { name: name.to_string(), dim, classes, samples, index })
    }

    /// Materialize a spec: generate or load samples, then split the pools.
    ///
    /// All randomness derives from `seed` via the `"synth"` and `"split"`
    /// streams, so the same spec and seed always yield identical pools.
    pub fn from_spec(spec: &DatasetSpec, seed: u64) -> Result<(Dataset, PoolState)> {
        spec.validate()?;
        match &spec.source {
            DataSource::Synth { n, sep } => {
                let samples =
                    synth_blobs(*n, spec.classes, spec.dim, *sep, rng::derive(seed, "synth", 0))?;
                let dataset = Dataset::new(&spec.name, spec.dim, spec.classes, samples)?;
                let pool = split_pools(&dataset, spec.split, rng::derive(seed, "split", 0))?;
                Ok((dataset, pool))
            }
            DataSource::Csv { path } => load_csv(Path::new(path), spec, seed),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, id: SampleId) -> Option<&Sample> {
        self.index.get(&id).map(|&pos| &self.samples[pos])
    }

    /// Feature vector for `id`. Panics if the id is unknown; pools are
    /// validated at construction so this only fires on internal misuse.
    pub fn features(&self, id: SampleId) -> &[f64] {
        &self.sample(id).unwrap_or_else(|| panic!("unknown sample id {id}")).features
    }

    pub fn true_label(&self, id: SampleId) -> usize {
        self.sample(id).unwrap_or_else(|| panic!("unknown sample id {id}")).true_label
    }

    pub fn ids(&self) -> impl Iterator<Item = SampleId> + '_ {
        self.samples.iter().map(|s| s.id)
    }
}

/// Pool membership and the labels observed from the (possibly corrupted)
/// oracle. `observed` equals the true label unless `corrupt_labels` touched
/// the id; ground truth stays in the [`Dataset`] so metrics remain valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub labeled: BTreeSet<SampleId>,
    pub unlabeled: BTreeSet<SampleId>,
    pub dev: Vec<SampleId>,
    pub test: Vec<SampleId>,
    pub observed: BTreeMap<SampleId, usize>,
}

impl PoolState {
    /// Total size of the training pool (labeled + unlabeled).
    pub fn train_total(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn observed_label(&self, id: SampleId) -> Option<usize> {
        self.observed.get(&id).copied()
    }

    /// Move `ids` from the unlabeled to the labeled pool, recording their
    /// oracle labels. Returns a new state; the input is untouched.
    pub fn acquire(&self, dataset: &Dataset, ids: &[SampleId]) -> Result<PoolState> {
        let mut next = self.clone();
        for &id in ids {
            if !next.unlabeled.remove(&id) {
                return Err(Error::Acquisition(id));
            }
            next.labeled.insert(id);
            next.observed.insert(id, dataset.true_label(id));
        }
        Ok(next)
    }

    /// Flip the observed label of `floor(ratio * ids.len())` of the given
    /// ids, chosen uniformly without replacement. Each victim moves to a
    /// uniformly random class different from its current observed label.
    /// Returns the new state and the flipped ids.
    pub fn corrupt_labels(
        &self,
        ids: &[SampleId],
        ratio: f64,
        classes: usize,
        seed: u64,
    ) -> Result<(PoolState, Vec<SampleId>)> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::Argument(format!("corruption ratio {ratio} outside [0, 1]")));
        }
        for &id in ids {
            if !self.labeled.contains(&id) {
                return Err(Error::Argument(format!("id {id} is not labeled; cannot corrupt")));
            }
        }
        let mut sorted: Vec<SampleId> = ids.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let n_flip = (ratio * sorted.len() as f64).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = rand::seq::index::sample(&mut rng, sorted.len(), n_flip);
        let mut next = self.clone();
        let mut flipped: Vec<SampleId> = picks.iter().map(|i| sorted[i]).collect();
        flipped.sort_unstable();
        for &id in &flipped {
            let current = next.observed[&id];
            // Draw from the C-1 other classes.
            let mut new_label = rng.random_range(0..classes - 1);
            if new_label >= current {
                new_label += 1;
            }
            next.observed.insert(id, new_label);
        }
        Ok((next, flipped))
    }
}

use rand::SeedableRng;

/// Class means for the blob generator. When the dimensionality allows
/// (`dim >= classes - 1`) the means form a regular simplex with edge
/// length `sep`, so every pair of classes sits exactly `sep` apart; in
/// lower dimensions they fall back to a line with spacing `sep`.
fn blob_means(classes: usize, dim: usize, sep: f64) -> Vec<Vec<f64>> {
    if dim < classes - 1 {
        return (0..classes)
            .map(|c| {
                let mut mean = vec![0.0; dim];
                mean[0] = c as f64 * sep;
                mean
            })
            .collect();
    }
    // Center the axis simplex {e_c} in R^classes, then express it in an
    // orthonormal basis of the zero-sum subspace (Gram-Schmidt over
    // e_i - e_last). Pairwise distances are sqrt(2), rescaled to sep.
    let c = classes;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(c - 1);
    for i in 0..c - 1 {
        let mut v = vec![0.0; c];
        v[i] = 1.0;
        v[c - 1] = -1.0;
        for u in &basis {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        basis.push(v);
    }
    let scale = sep / 2.0f64.sqrt();
    (0..c)
        .map(|class| {
            let centered: Vec<f64> =
                (0..c).map(|j| if j == class { 1.0 - 1.0 / c as f64 } else { -1.0 / c as f64 }).collect();
            let mut mean = vec![0.0; dim];
            for (axis, u) in basis.iter().enumerate() {
                let coord: f64 = centered.iter().zip(u).map(|(a, b)| a * b).sum();
                mean[axis] = coord * scale;
            }
            mean
        })
        .collect()
}

/// Generate `n` samples from `classes` isotropic unit-variance Gaussians
/// with means `sep` apart (see [`blob_means`]). Class counts are balanced
/// within one sample; labels interleave so any prefix stays balanced.
pub fn synth_blobs(
    n: usize,
    classes: usize,
    dim: usize,
    sep: f64,
    seed: u64,
) -> Result<Vec<Sample>> {
    if classes < 2 {
        return Err(Error::Argument(format!("need at least 2 classes, got {classes}")));
    }
    if n < classes {
        return Err(Error::Argument(format!("n = {n} must be at least the class count {classes}")));
    }
    if dim == 0 {
        return Err(Error::Argument("dimensionality must be at least 1".into()));
    }
    if sep <= 0.0 {
        return Err(Error::Argument(format!("separation must be positive, got {sep}")));
    }
    let means = blob_means(classes, dim, sep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        let features = means[label]
            .iter()
            .map(|&mean| mean + rng.sample::<f64, _>(StandardNormal))
            .collect();
        samples.push(Sample { id: i as SampleId, features, true_label: label });
    }
    Ok(samples)
}

/// Deterministically partition a dataset into train/dev/test pools.
/// Train ids all start unlabeled. Sizes are `floor(n * f_train)` and
/// `floor(n * f_dev)`; the remainder goes to test.
pub fn split_pools(dataset: &Dataset, split: SplitFractions, seed: u64) -> Result<PoolState> {
    split.validate()?;
    let mut ids: Vec<SampleId> = dataset.ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n = ids.len();
    let n_train = (n as f64 * split.train).floor() as usize;
    let n_dev = (n as f64 * split.dev).floor() as usize;
    if n_train == 0 {
        return Err(Error::Argument("train split is empty".into()));
    }
    if n_dev == 0 {
        return Err(Error::Argument("dev split is empty".into()));
    }
    let mut unlabeled: Vec<SampleId> = ids[..n_train].to_vec();
    let mut dev: Vec<SampleId> = ids[n_train..n_train + n_dev].to_vec();
    let mut test: Vec<SampleId> = ids[n_train + n_dev..].to_vec();
    unlabeled.sort_unstable();
    dev.sort_unstable();
    test.sort_unstable();
    Ok(PoolState {
        labeled: BTreeSet::new(),
        unlabeled: unlabeled.into_iter().collect(),
        dev,
        test,
        observed: BTreeMap::new(),
    })
}

/// Load a CSV dataset (header `id,label,f1..fd`) and split it into pools.
pub fn load_csv(path: &Path, spec: &DatasetSpec, seed: u64) -> Result<(Dataset, PoolState)> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse { line: 0, message: format!("{path:?}: {e}") })?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        if headers.len() < 2 || &headers[0] != "id" || &headers[1] != "label" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header starting `id,label`, got {headers:?}"),
            });
        }
        if headers.len() != spec.dim + 2 {
            return Err(Error::Dimension { expected: spec.dim, got: headers.len() - 2 });
        }
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != spec.dim + 2 {
            return Err(Error::Dimension { expected: spec.dim, got: record.len() - 2 });
        }
        let id: SampleId = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad id `{}`", &record[0]) })?;
        let label: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad label `{}`", &record[1]) })?;
        if label >= spec.classes {
            return Err(Error::Label { label, classes: spec.classes });
        }
        let mut features = Vec::with_capacity(spec.dim);
        for field in record.iter().skip(2) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad feature value `{field}`"),
            })?;
            features.push(v);
        }
        samples.push(Sample { id, features, true_label: label });
    }
    let dataset = Dataset::new(&spec.name, spec.dim, spec.classes, samples)?;
    let pool = split_pools(&dataset, spec.split, rng::derive(seed, "split", 0))?;
    Ok((dataset, pool))
}
