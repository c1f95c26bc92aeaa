//! Run configuration.

use serde::{Deserialize, Serialize};

use crate::acquisition::Strategy;
use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::model::TrainConfig;

/// Training mode for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Conventional loop: cross-entropy only.
    Baseline,
    /// Distill from the most recent predecessor.
    TrustalMc,
    /// Distill from the consistency-selected predecessor.
    TrustalNc,
    /// Distill from the averaged ensemble of all predecessors.
    TrustalEnsemble,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "trustal_mc" => Ok(Mode::TrustalMc),
            "trustal_nc" => Ok(Mode::TrustalNc),
            "trustal_ensemble" => Ok(Mode::TrustalEnsemble),
            other => Err(Error::Argument(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Mode::Baseline => "baseline",
            Mode::TrustalMc => "trustal_mc",
            Mode::TrustalNc => "trustal_nc",
            Mode::TrustalEnsemble => "trustal_ensemble",
        };
        f.write_str(name)
    }
}

/// When label corruption begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStart {
    /// From the first round after the phase boundary detected online from
    /// the validation-accuracy history.
    Phase,
    /// From this round (inclusive) onward.
    Round(usize),
}

/// Label-noise experiment settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub start: NoiseStart,
    pub ratio: f64,
}

/// Which labeled samples receive teacher pseudo labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillScope {
    /// The whole labeled pool (the cache keeps this cheap).
    All,
    /// Only the round's newly acquired batch.
    NewOnly,
}

impl std::str::FromStr for DistillScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(DistillScope::All),
            "new_only" => Ok(DistillScope::NewOnly),
            other => Err(Error::Argument(format!("unknown distillation scope `{other}`"))),
        }
    }
}

/// Everything needed to reproduce a run (modulo the per-run seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub strategy: Strategy,
    pub mode: Mode,
    /// Number of acquisition rounds T.
    pub rounds: usize,
    /// Fraction of the train pool labeled before the seed model.
    pub initial_fraction: f64,
    /// Fraction of the train pool acquired each round.
    pub per_round_fraction: f64,
    pub train: TrainConfig,
    pub distill_scope: DistillScope,
    pub noise: Option<NoiseConfig>,
    pub seeds: Vec<u64>,
    /// Explicit phase boundary, overriding the moving-average rule.
    pub phase_boundary_override: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        if self.rounds == 0 {
            return Err(Error::Argument("need at least 1 round".into()));
        }
        for (name, f) in
            [("initial_fraction", self.initial_fraction), ("per_round_fraction", self.per_round_fraction)]
        {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1], got {f}")));
            }
        }
        if let Some(noise) = &self.noise {
            if !(0.0..=1.0).contains(&noise.ratio) {
                return Err(Error::Argument(format!(
                    "noise ratio must lie in [0, 1], got {}",
                    noise.ratio
                )));
            }
            if let NoiseStart::Round(r) = noise.start {
                if r == 0 {
                    return Err(Error::Argument("noise start round must be at least 1".into()));
                }
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Argument("need at least one seed".into()));
        }
        Ok(())
    }

    /// Stable fingerprint of the resolved configuration (FNV-1a over the
    /// canonical JSON form).
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut hash: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x100000001b3);
        }
        format!("{hash:016x}")
    }
}
