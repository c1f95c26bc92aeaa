//! Per-round and per-run metric records, plus phase detection.

use serde::{Deserialize, Serialize};

use crate::acquisition::Strategy;
use crate::data::{DatasetSpec, SampleId};
use crate::error::{Error, Result};

use super::Mode;

/// Metrics of one acquisition round. Wall time is kept out of the
/// serialized form so report files stay byte-reproducible; timings live in
/// the run metadata instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub labeled_fraction: f64,
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    pub mci: f64,
    /// Events against the previous generation.
    pub forgetting_events: usize,
    pub learning_events: usize,
    pub teacher_generation: Option<usize>,
    pub teacher_score: Option<f64>,
    pub acquired_ids: Vec<SampleId>,
    pub corrupted_ids: Vec<SampleId>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Per-phase metric means in the shape of the robustness tables: stable
/// phase first, saturated phase absent when the boundary is the last
/// round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAverages {
    pub stable_accuracy: f64,
    pub stable_mci: f64,
    pub saturated_accuracy: Option<f64>,
    pub saturated_mci: Option<f64>,
}

/// Full record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub dataset: DatasetSpec,
    pub mode: Mode,
    pub strategy: Strategy,
    pub seed: u64,
    pub budget_per_round: usize,
    pub seed_acquired_ids: Vec<SampleId>,
    pub seed_val_accuracy: f64,
    pub seed_test_accuracy: f64,
    pub rounds: Vec<RoundReport>,
    pub mean_pairwise_correct_consistency: f64,
    /// Last round of the stable phase.
    pub phase_boundary: usize,
    pub phases: PhaseAverages,
    /// True when the unlabeled pool ran out before the configured rounds.
    pub truncated: bool,
    pub distill_cache_hit_ratio: Option<f64>,
}

impl RunReport {
    pub fn val_accuracy_series(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.val_accuracy).collect()
    }

    pub fn test_accuracy_series(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.test_accuracy).collect()
    }
}

/// First round at which a centered three-round moving average of the
/// series stops increasing. With windows `w(r)` over rounds
/// `(r-1, r, r+1)`, the boundary is `r - 1` for the first `r` with
/// `w(r) <= w(r-1)`; `None` while the averages keep rising.
///
/// The rule is prefix-stable: once it fires on a prefix of the series it
/// fires at the same place on every extension, so online detection during
/// a run agrees with post-hoc detection over the full series.
pub fn moving_average_boundary(series: &[f64]) -> Option<usize> {
    let n = series.len();
    if n < 4 {
        return None;
    }
    let window = |center: usize| (series[center - 2] + series[center - 1] + series[center]) / 3.0;
    // `center` is a 1-based round index; windows exist for 2..=n-1.
    for center in 3..n {
        if window(center) <= window(center - 1) {
            return Some(center - 1);
        }
    }
    None
}

/// Boundary between the stable and saturated phases of a finished run:
/// the moving-average rule over validation accuracy, or the final round
/// when accuracy never stops increasing. Needs at least three rounds.
pub fn detect_phases(report: &RunReport) -> Result<usize> {
    let series = report.val_accuracy_series();
    if series.len() < 3 {
        return Err(Error::Analysis(format!(
            "phase detection needs at least 3 rounds, got {}",
            series.len()
        )));
    }
    Ok(moving_average_boundary(&series).unwrap_or(series.len()))
}

/// Phase means over the round reports given a boundary (stable = rounds
/// 1..=boundary).
pub fn phase_averages(rounds: &[RoundReport], boundary: usize) -> PhaseAverages {
    let (stable, saturated): (Vec<_>, Vec<_>) = rounds.iter().partition(|r| r.round <= boundary);
    let mean = |rs: &[&RoundReport], f: fn(&RoundReport) -> f64| -> f64 {
        rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64
    };
    PhaseAverages {
        stable_accuracy: mean(&stable, |r| r.test_accuracy),
        stable_mci: mean(&stable, |r| r.mci),
        saturated_accuracy: (!saturated.is_empty()).then(|| mean(&saturated, |r| r.test_accuracy)),
        saturated_mci: (!saturated.is_empty()).then(|| mean(&saturated, |r| r.mci)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strictly_increasing_series_never_fires() {
        let series = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(moving_average_boundary(&series), None);
    }

    #[test]
    fn plateau_fires_at_round_four() {
        let series = [0.5, 0.6, 0.7, 0.7, 0.69, 0.68];
        assert_eq!(moving_average_boundary(&series), Some(4));
    }

    #[test]
    fn constant_series_fires_at_first_comparable_window() {
        let series = [0.5; 6];
        assert_eq!(moving_average_boundary(&series), Some(2));
    }

    #[test]
    fn detection_is_prefix_stable() {
        let series = [0.5, 0.6, 0.7, 0.7, 0.69, 0.68, 0.9, 1.0];
        let full = moving_average_boundary(&series);
        for cut in 5..=series.len() {
            if let Some(b) = moving_average_boundary(&series[..cut]) {
                assert_eq!(Some(b), full);
            }
        }
    }
}
