//! k-means++ seeding and Lloyd iterations, shared by the gradient-space
//! batch acquisition and the post-hoc diversity analysis.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Distribution of the first k-means++ center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstPick {
    /// Uniform over the points (classic k-means++).
    Uniform,
    /// Proportional to the squared norm of each point, so zero vectors are
    /// never picked first while any nonzero vector exists.
    SquaredNorm,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Draw index `i` with probability `weights[i] / total` using exactly one
/// uniform draw. If the total weight is zero or non-finite, fall back to
/// the smallest-index candidate with no draw consumed.
fn weighted_pick<R: Rng>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return weights.iter().position(|&w| w >= 0.0);
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cum += w;
            last = Some(i);
            if cum > u {
                return Some(i);
            }
        }
    }
    last
}

/// k-means++ seeding: pick `k` distinct point indices. After the first
/// pick every subsequent center is drawn with probability proportional to
/// the squared distance to the nearest already-chosen center. One uniform
/// draw is consumed per center (none on the zero-total fallback).
pub fn kmeans_plus_plus<R: Rng>(
    points: &[Vec<f64>],
    k: usize,
    first: FirstPick,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::Argument(format!(
            "cannot pick {k} centers from {} points",
            points.len()
        )));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut weights: Vec<f64> = match first {
        FirstPick::Uniform => vec![1.0; points.len()],
        FirstPick::SquaredNorm => points.iter().map(|p| p.iter().map(|v| v * v).sum()).collect(),
    };
    let first_idx = weighted_pick(&weights, rng).expect("non-empty candidate set");
    chosen.push(first_idx);
    // min squared distance to the chosen set; 0 for chosen points.
    let mut min_dist: Vec<f64> =
        points.iter().map(|p| sq_dist(p, &points[first_idx])).collect();
    while chosen.len() < k {
        for (i, w) in weights.iter_mut().enumerate() {
            *w = if chosen.contains(&i) { 0.0 } else { min_dist[i] };
        }
        let pick = match weighted_pick(&weights, rng) {
            Some(i) if !chosen.contains(&i) => i,
            // All remaining weights zero (duplicate points): take the
            // smallest unchosen index.
            _ => (0..points.len()).find(|i| !chosen.contains(i)).unwrap(),
        };
        chosen.push(pick);
        for (i, d) in min_dist.iter_mut().enumerate() {
            let nd = sq_dist(&points[i], &points[pick]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(chosen)
}

/// Result of Lloyd clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub centroids: Vec<Vec<f64>>,
    /// Nearest-centroid index per input point.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

/// k-means++ seeding followed by Lloyd iterations until the assignment
/// reaches a fixpoint or `max_iters` passes. Empty clusters keep their
/// previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<ClusterAssignment> {
    if points.len() < k {
        return Err(Error::Argument(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = kmeans_plus_plus(points, k, FirstPick::Uniform, &mut rng)?;
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&i| points[i].clone()).collect();
    let mut assignment = vec![0usize; points.len()];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(p, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            inertia += best_d;
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        inertia_history.push(inertia);
        if iterations > 0 && !changed {
            break;
        }
        iterations += 1;
        if iterations > max_iters {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }
    let inertia = *inertia_history.last().unwrap();
    Ok(ClusterAssignment { centroids, assignment, inertia, iterations, inertia_history })
}
