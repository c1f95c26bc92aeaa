//! Data-acquisition strategies: given the current acquisition model and
//! the pool, pick `k` unlabeled ids for oracle labeling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans_plus_plus, sq_dist, FirstPick};
use crate::data::{Dataset, PoolState, SampleId};
use crate::error::{Error, Result};
use crate::model::{argmax, ModelParams};

/// Strategy selector, addressable by name from run configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Conf,
    Coreset,
    Badge,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "conf" => Ok(Strategy::Conf),
            "coreset" => Ok(Strategy::Coreset),
            "badge" => Ok(Strategy::Badge),
            other => Err(Error::Argument(format!("unknown strategy `{other}`"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Strategy::Random => "random",
            Strategy::Conf => "conf",
            Strategy::Coreset => "coreset",
            Strategy::Badge => "badge",
        };
        f.write_str(name)
    }
}

/// One acquisition call: the model scoring the pool, the budget, and the
/// seed for any internal randomness.
pub struct AcquisitionRequest<'a> {
    pub model: &'a ModelParams,
    pub dataset: &'a Dataset,
    pub pool: &'a PoolState,
    pub k: usize,
    pub seed: u64,
}

impl AcquisitionRequest<'_> {
    fn validate(&self) -> Result<Vec<SampleId>> {
        if self.k == 0 {
            return Err(Error::Argument("budget k must be at least 1".into()));
        }
        let unlabeled: Vec<SampleId> = self.pool.unlabeled.iter().copied().collect();
        if self.k > unlabeled.len() {
            return Err(Error::Budget { requested: self.k, available: unlabeled.len() });
        }
        Ok(unlabeled)
    }
}

/// Dispatch by strategy name.
pub fn select(strategy: Strategy, req: &AcquisitionRequest) -> Result<Vec<SampleId>> {
    match strategy {
        Strategy::Random => random_select(req),
        Strategy::Conf => conf_select(req),
        Strategy::Coreset => coreset_select(req),
        Strategy::Badge => badge_select(req),
    }
}

/// `k` ids sampled uniformly without replacement.
pub fn random_select(req: &AcquisitionRequest) -> Result<Vec<SampleId>> {
    let unlabeled = req.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let picks = rand::seq::index::sample(&mut rng, unlabeled.len(), req.k);
    Ok(picks.iter().map(|i| unlabeled[i]).collect())
}

/// Least-confidence sampling: the `k` unlabeled ids whose largest
/// predicted class probability is smallest, ties broken by ascending id.
/// Keeps a bounded heap rather than sorting the whole pool.
pub fn conf_select(req: &AcquisitionRequest) -> Result<Vec<SampleId>> {
    let unlabeled = req.validate()?;
    let mut heap: std::collections::BinaryHeap<ConfKey> =
        std::collections::BinaryHeap::with_capacity(req.k + 1);
    for id in unlabeled {
        let out = req.model.forward(req.dataset.features(id))?;
        let max_prob = out.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        heap.push(ConfKey { max_prob, id });
        if heap.len() > req.k {
            heap.pop();
        }
    }
    let mut selected: Vec<ConfKey> = heap.into_vec();
    selected.sort();
    Ok(selected.into_iter().map(|key| key.id).collect())
}

/// Max-heap key ordered by (max_prob, id); the heap root is the worst
/// candidate, i.e. the most confident one.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ConfKey {
    max_prob: f64,
    id: SampleId,
}

impl Eq for ConfKey {}

impl Ord for ConfKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.max_prob.total_cmp(&other.max_prob).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for ConfKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy furthest-first traversal in the penultimate embedding space,
/// conditioned on all labeled samples: each step takes the unlabeled point
/// whose minimum distance to (labeled + already selected) is largest, ties
/// broken by ascending id. Squared distances are used throughout; the
/// ordering matches Euclidean distance.
pub fn coreset_select(req: &AcquisitionRequest) -> Result<Vec<SampleId>> {
    let unlabeled = req.validate()?;
    if req.pool.labeled.is_empty() {
        return Err(Error::Argument("coreset needs a non-empty labeled pool to condition on".into()));
    }
    let embed = |id: SampleId| -> Result<Vec<f64>> {
        Ok(req.model.forward(req.dataset.features(id))?.penult)
    };
    let candidates: Vec<(SampleId, Vec<f64>)> =
        unlabeled.iter().map(|&id| Ok((id, embed(id)?))).collect::<Result<_>>()?;
    let mut min_dist = vec![f64::INFINITY; candidates.len()];
    for &id in &req.pool.labeled {
        let center = embed(id)?;
        for (slot, (_, emb)) in min_dist.iter_mut().zip(&candidates) {
            let d = sq_dist(emb, &center);
            if d < *slot {
                *slot = d;
            }
        }
    }
    let mut selected = Vec::with_capacity(req.k);
    let mut taken = vec![false; candidates.len()];
    for _ in 0..req.k {
        let mut best: Option<usize> = None;
        for (i, &d) in min_dist.iter().enumerate() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| d > min_dist[b]) {
                best = Some(i);
            }
        }
        let pick = best.expect("budget validated against pool size");
        taken[pick] = true;
        selected.push(candidates[pick].0);
        let center = &candidates[pick].1;
        for (i, (_, emb)) in candidates.iter().enumerate() {
            if !taken[i] {
                let d = sq_dist(emb, center);
                if d < min_dist[i] {
                    min_dist[i] = d;
                }
            }
        }
    }
    Ok(selected)
}

/// Gradient embedding used by the hybrid strategy: the last-layer loss
/// gradient under the model's own pseudo label,
/// `(probs - onehot(argmax probs)) outer penult`, flattened to length
/// `classes * penult_dim`.
pub fn badge_embedding(model: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    let out = model.forward(x)?;
    let pseudo = argmax(&out.probs);
    let mut g = Vec::with_capacity(model.classes * out.penult.len());
    for c in 0..model.classes {
        let coeff = out.probs[c] - if c == pseudo { 1.0 } else { 0.0 };
        for &p in &out.penult {
            g.push(coeff * p);
        }
    }
    Ok(g)
}

/// Hybrid uncertainty/diversity sampling: k-means++ seeding over the
/// pseudo-label gradient embeddings, first center proportional to squared
/// gradient norm, k distinct picks returned in selection order.
pub fn badge_select(req: &AcquisitionRequest) -> Result<Vec<SampleId>> {
    let unlabeled = req.validate()?;
    let embeddings: Vec<Vec<f64>> = unlabeled
        .iter()
        .map(|&id| badge_embedding(req.model, req.dataset.features(id)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let picks = kmeans_plus_plus(&embeddings, req.k, FirstPick::SquaredNorm, &mut rng)?;
    Ok(picks.into_iter().map(|i| unlabeled[i]).collect())
}
