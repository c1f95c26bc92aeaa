//! Prediction-history ledger over the dev set.
//!
//! One row per trained generation records which dev samples the model got
//! right (and what it predicted). Forgetting/learning events, per-sample
//! correct inconsistency, its dev-wide mean (MCI), and pairwise
//! correct-consistency all read off this matrix.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PoolState, SampleId};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Generations-by-dev-samples correctness history. Predicted labels are
/// stored alongside the boolean rows so pairwise consistency needs no
/// recomputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccMatrix {
    dev_ids: Vec<SampleId>,
    dev_labels: Vec<usize>,
    correct: Vec<Vec<bool>>,
    preds: Vec<Vec<usize>>,
}

impl AccMatrix {
    pub fn new(dev_ids: Vec<SampleId>, dev_labels: Vec<usize>) -> Result<Self> {
        if dev_ids.is_empty() {
            return Err(Error::Argument("dev set is empty".into()));
        }
        if dev_ids.len() != dev_labels.len() {
            return Err(Error::Shape(format!(
                "{} dev ids but {} labels",
                dev_ids.len(),
                dev_labels.len()
            )));
        }
        Ok(Self { dev_ids, dev_labels, correct: Vec::new(), preds: Vec::new() })
    }

    pub fn for_pool(dataset: &Dataset, pool: &PoolState) -> Result<Self> {
        let labels = pool.dev.iter().map(|&id| dataset.true_label(id)).collect();
        Self::new(pool.dev.clone(), labels)
    }

    /// Number of recorded generations.
    pub fn generations(&self) -> usize {
        self.correct.len()
    }

    pub fn dev_size(&self) -> usize {
        self.dev_ids.len()
    }

    pub fn dev_ids(&self) -> &[SampleId] {
        &self.dev_ids
    }

    /// Append one generation from raw predicted labels.
    pub fn push_row(&mut self, preds: Vec<usize>) -> Result<()> {
        if preds.len() != self.dev_ids.len() {
            return Err(Error::Shape(format!(
                "row has {} entries, dev size is {}",
                preds.len(),
                self.dev_ids.len()
            )));
        }
        let correct = preds.iter().zip(&self.dev_labels).map(|(p, y)| p == y).collect();
        self.correct.push(correct);
        self.preds.push(preds);
        Ok(())
    }

    /// Evaluate `params` on the dev set and append the resulting row.
    pub fn record_generation(&mut self, params: &ModelParams, dataset: &Dataset) -> Result<()> {
        let preds = self
            .dev_ids
            .iter()
            .map(|&id| params.predict(dataset.features(id)))
            .collect::<Result<Vec<usize>>>()?;
        self.push_row(preds)
    }

    fn check_generation(&self, t: usize) -> Result<()> {
        if t >= self.generations() {
            return Err(Error::Generation(t));
        }
        Ok(())
    }

    pub fn row(&self, t: usize) -> Result<&[bool]> {
        self.check_generation(t)?;
        Ok(&self.correct[t])
    }

    pub fn preds_row(&self, t: usize) -> Result<&[usize]> {
        self.check_generation(t)?;
        Ok(&self.preds[t])
    }

    /// Dev accuracy of generation `t`.
    pub fn accuracy(&self, t: usize) -> Result<f64> {
        let row = self.row(t)?;
        Ok(row.iter().filter(|&&c| c).count() as f64 / row.len() as f64)
    }

    /// Count of samples correct at `t1` but wrong at `t2`.
    pub fn forgetting_events(&self, t1: usize, t2: usize) -> Result<usize> {
        if t1 >= t2 {
            return Err(Error::Generation(t1));
        }
        self.check_generation(t2)?;
        Ok(self.correct[t1]
            .iter()
            .zip(&self.correct[t2])
            .filter(|(&early, &late)| early && !late)
            .count())
    }

    /// Count of samples wrong at `t1` but correct at `t2`.
    pub fn learning_events(&self, t1: usize, t2: usize) -> Result<usize> {
        if t1 >= t2 {
            return Err(Error::Generation(t1));
        }
        self.check_generation(t2)?;
        Ok(self.correct[t1]
            .iter()
            .zip(&self.correct[t2])
            .filter(|(&early, &late)| !early && late)
            .count())
    }

    /// Per-sample correct inconsistency of generation `t`: how many of the
    /// `t` predecessors were correct where generation `t` is wrong.
    pub fn correct_inconsistency(&self, t: usize) -> Result<Vec<u32>> {
        if t == 0 {
            return Err(Error::Generation(0));
        }
        self.check_generation(t)?;
        let m = self.dev_size();
        let mut counts = vec![0u32; m];
        for (i, count) in counts.iter_mut().enumerate() {
            if !self.correct[t][i] {
                *count = self.correct[..t].iter().filter(|row| row[i]).count() as u32;
            }
        }
        Ok(counts)
    }

    /// Mean correct inconsistency: the dev-wide sum of per-sample counts,
    /// normalized by the number of predecessors `t`.
    pub fn mci(&self, t: usize) -> Result<f64> {
        let counts = self.correct_inconsistency(t)?;
        Ok(counts.iter().map(|&c| c as f64).sum::<f64>() / t as f64)
    }

    /// Fraction of dev samples that generations `m` and `n` both classify
    /// correctly.
    pub fn correct_consistency(&self, m_gen: usize, n_gen: usize) -> Result<f64> {
        self.check_generation(m_gen)?;
        self.check_generation(n_gen)?;
        let both = self.correct[m_gen]
            .iter()
            .zip(&self.correct[n_gen])
            .filter(|(&a, &b)| a && b)
            .count();
        Ok(both as f64 / self.dev_size() as f64)
    }

    /// Average of `correct_consistency` over all generation pairs m < n.
    pub fn mean_pairwise_correct_consistency(&self) -> Result<f64> {
        let gens = self.generations();
        if gens < 2 {
            return Err(Error::Analysis("need at least two generations for pairwise consistency".into()));
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for m in 0..gens {
            for n in m + 1..gens {
                total += self.correct_consistency(m, n)?;
                pairs += 1;
            }
        }
        Ok(total / pairs as f64)
    }

    /// CSV export: one row per generation, one column per dev id, values
    /// 0/1.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("generation");
        for id in &self.dev_ids {
            out.push_str(&format!(",{id}"));
        }
        out.push('\n');
        for (t, row) in self.correct.iter().enumerate() {
            out.push_str(&t.to_string());
            for &c in row {
                out.push_str(if c { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// History built from raw correctness rows: label 0 everywhere, a
    /// correct prediction is 0, a wrong one is 1.
    fn from_bools(rows: &[Vec<bool>]) -> AccMatrix {
        let m = rows[0].len();
        let mut mat = AccMatrix::new((0..m as u64).collect(), vec![0; m]).unwrap();
        for row in rows {
            mat.push_row(row.iter().map(|&c| usize::from(!c)).collect()).unwrap();
        }
        mat
    }

    #[test]
    fn rows_have_dev_length_and_identical_models_match() {
        let mut mat = AccMatrix::new(vec![1, 2, 3], vec![0, 1, 0]).unwrap();
        mat.push_row(vec![0, 1, 1]).unwrap();
        mat.push_row(vec![0, 1, 1]).unwrap();
        assert_eq!(mat.row(0).unwrap().len(), 3);
        assert_eq!(mat.row(0).unwrap(), mat.row(1).unwrap());
        assert_eq!(mat.forgetting_events(0, 1).unwrap(), 0);
    }

    #[test]
    fn forgetting_and_learning_counts() {
        let mat = from_bools(&[vec![true, true, false], vec![false, true, true]]);
        assert_eq!(mat.forgetting_events(0, 1).unwrap(), 1);
        assert_eq!(mat.learning_events(0, 1).unwrap(), 1);
    }

    #[test]
    fn same_generation_comparison_is_rejected() {
        let mat = from_bools(&[vec![true], vec![true]]);
        assert!(matches!(mat.forgetting_events(1, 1), Err(Error::Generation(1))));
    }

    #[test]
    fn correct_inconsistency_hand_case() {
        let mat = from_bools(&[vec![true, true], vec![false, true]]);
        assert_eq!(mat.correct_inconsistency(1).unwrap(), vec![1, 0]);
        assert_eq!(mat.mci(1).unwrap(), 1.0);
    }

    #[test]
    fn all_correct_generation_has_zero_inconsistency() {
        let mat = from_bools(&[vec![true, false, true], vec![true, true, true]]);
        assert_eq!(mat.correct_inconsistency(1).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn inconsistency_requires_a_predecessor() {
        let mat = from_bools(&[vec![true, true]]);
        assert!(matches!(mat.correct_inconsistency(0), Err(Error::Generation(0))));
    }

    #[test]
    fn identical_history_has_zero_mci() {
        let rows = vec![vec![true, false, true]; 5];
        let mat = from_bools(&rows);
        for t in 1..5 {
            assert_eq!(mat.mci(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn mci_matches_brute_force_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let gens = rng.random_range(2..=20);
            let m = rng.random_range(1..=50);
            let rows: Vec<Vec<bool>> =
                (0..gens).map(|_| (0..m).map(|_| rng.random::<bool>()).collect()).collect();
            let mat = from_bools(&rows);
            for t in 1..gens {
                let mut brute = vec![0u32; m];
                for dt in 1..=t {
                    for i in 0..m {
                        if rows[t - dt][i] && !rows[t][i] {
                            brute[i] += 1;
                        }
                    }
                }
                assert_eq!(mat.correct_inconsistency(t).unwrap(), brute);
                let brute_mci = brute.iter().map(|&c| c as f64).sum::<f64>() / t as f64;
                assert_eq!(mat.mci(t).unwrap(), brute_mci);
                // Second identity: the dev-wide sum equals the sum of
                // forgetting events against every predecessor.
                let via_events: usize =
                    (0..t).map(|p| mat.forgetting_events(p, t).unwrap()).sum();
                assert_eq!(brute.iter().map(|&c| c as usize).sum::<usize>(), via_events);
            }
        }
    }

    #[test]
    fn dominating_histories_have_zero_mci() {
        // Each generation's correctness dominates its predecessor's.
        let rows = vec![
            vec![false, false, false, false],
            vec![true, false, false, false],
            vec![true, true, false, false],
            vec![true, true, true, true],
        ];
        let mat = from_bools(&rows);
        for t in 1..4 {
            assert_eq!(mat.mci(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn self_consistency_equals_accuracy() {
        let mat = from_bools(&[vec![true, false, true, true]]);
        assert_eq!(mat.correct_consistency(0, 0).unwrap(), mat.accuracy(0).unwrap());
    }

    #[test]
    fn pairwise_consistency_hand_case_and_symmetry() {
        let mut mat = AccMatrix::new(vec![0, 1], vec![0, 1]).unwrap();
        mat.push_row(vec![0, 1]).unwrap(); // both right
        mat.push_row(vec![0, 0]).unwrap(); // second wrong
        assert_eq!(mat.correct_consistency(0, 1).unwrap(), 0.5);
        assert_eq!(
            mat.correct_consistency(0, 1).unwrap(),
            mat.correct_consistency(1, 0).unwrap()
        );
    }

    #[test]
    fn consistency_bounded_by_either_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<bool>> =
            (0..6).map(|_| (0..30).map(|_| rng.random::<bool>()).collect()).collect();
        let mat = from_bools(&rows);
        for m in 0..6 {
            for n in 0..6 {
                let cc = mat.correct_consistency(m, n).unwrap();
                assert!(cc <= mat.accuracy(m).unwrap() + 1e-12);
                assert!(cc <= mat.accuracy(n).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn csv_export_shape() {
        let mat = from_bools(&[vec![true, false], vec![false, true]]);
        let csv = mat.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "generation,0,1");
        assert_eq!(lines[1], "0,1,0");
        assert_eq!(lines[2], "1,0,1");
    }
}
