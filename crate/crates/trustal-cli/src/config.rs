//! Flat dotted-key config files.
//!
//! One `key = value` assignment per line, `#` starts a comment, blank
//! lines ignored. `--override key=value` flags win over file values.
//! Keys prefixed `sweep.` declare grid axes over the underlying key with
//! comma-separated values. The full grammar is documented in the README;
//! every resolved run echoes its exact configuration back out as
//! `resolved.cfg`, which is itself a valid config file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};

use trustal_core::data::{DataSource, DatasetSpec, SplitFractions};
use trustal_core::engine::{DistillScope, Mode, NoiseConfig, NoiseStart, RunConfig};
use trustal_core::model::{Arch, TrainConfig};
use trustal_core::Strategy;

/// Error class that maps to exit code 2 (usage/config problems).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(message.into()))
}

/// Raw key/value assignments, file order irrelevant.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("line {}: expected `key = value`", lineno + 1)))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// Apply `key=value` override strings on top of the file values.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| usage(format!("override `{item}`: expected key=value")))?;
            self.entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }
}

/// A fully resolved invocation: the run config plus harness settings.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub run: RunConfig,
    pub workers: usize,
    pub compare_threshold: f64,
    /// Sweep axes in declaration order: (underlying key, values).
    pub sweep_axes: Vec<(String, Vec<String>)>,
}

struct KeyReader {
    entries: BTreeMap<String, String>,
}

impl KeyReader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => raw.parse::<T>().map_err(|e| usage(format!("key `{key}`: {e}"))),
        }
    }

    fn parse_required<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.take(key).ok_or_else(|| usage(format!("missing required key `{key}`")))?;
        raw.parse::<T>().map_err(|e| usage(format!("key `{key}`: {e}")))
    }
}

pub fn resolve(raw: &RawConfig) -> Result<Resolved> {
    let mut sweep_axes = Vec::new();
    let mut plain = BTreeMap::new();
    for (key, value) in &raw.entries {
        if let Some(target) = key.strip_prefix("sweep.") {
            let values: Vec<String> =
                value.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                return Err(usage(format!("key `{key}`: empty sweep axis")));
            }
            sweep_axes.push((target.to_string(), values));
        } else {
            plain.insert(key.clone(), value.clone());
        }
    }
    let mut reader = KeyReader { entries: plain };

    let name: String = reader.parse("dataset.name", "dataset".to_string())?;
    let source_kind: String = reader.parse_required("dataset.source")?;
    let classes: usize = reader.parse_required("dataset.classes")?;
    let dim: usize = reader.parse_required("dataset.dim")?;
    let source = match source_kind.as_str() {
        "synth" => DataSource::Synth {
            n: reader.parse_required("dataset.synth.n")?,
            sep: reader.parse_required("dataset.synth.sep")?,
        },
        "csv" => DataSource::Csv { path: reader.parse_required::<String>("dataset.path")? },
        other => return Err(usage(format!("key `dataset.source`: unknown source `{other}`"))),
    };
    // Unused alternates are legal leftovers of sweeps/overrides.
    reader.take("dataset.path");
    reader.take("dataset.synth.n");
    reader.take("dataset.synth.sep");
    let split = SplitFractions {
        train: reader.parse("dataset.split.train", 0.8)?,
        dev: reader.parse("dataset.split.dev", 0.1)?,
        test: reader.parse("dataset.split.test", 0.1)?,
    };
    let dataset = DatasetSpec { name, dim, classes, source, split };

    let strategy: Strategy = match reader.take("strategy") {
        None => Strategy::Random,
        Some(raw) => raw.parse().map_err(|e| usage(format!("key `strategy`: {e}")))?,
    };
    let mode: Mode = match reader.take("mode") {
        None => Mode::Baseline,
        Some(raw) => raw.parse().map_err(|e| usage(format!("key `mode`: {e}")))?,
    };
    let arch: Arch = match reader.take("train.arch") {
        None => Arch::Linear,
        Some(raw) => raw.parse().map_err(|e| usage(format!("key `train.arch`: {e}")))?,
    };
    let train = TrainConfig {
        arch,
        hidden_dim: reader.parse("train.hidden", 32usize)?,
        learning_rate: reader.parse("train.learning_rate", 0.001)?,
        epochs: reader.parse("train.epochs", 10usize)?,
        batch_size: reader.parse("train.batch_size", 50usize)?,
        alpha: reader.parse("train.alpha", 0.75)?,
        seed: 0,
    };
    let distill_scope: DistillScope = match reader.take("distill.scope") {
        None => DistillScope::All,
        Some(raw) => raw.parse().map_err(|e| usage(format!("key `distill.scope`: {e}")))?,
    };
    let noise = match (reader.take("noise.start"), reader.take("noise.ratio")) {
        (None, None) => None,
        (Some(start), Some(ratio)) => {
            let start = if start == "phase" {
                NoiseStart::Phase
            } else {
                NoiseStart::Round(
                    start.parse().map_err(|e| usage(format!("key `noise.start`: {e}")))?,
                )
            };
            let ratio: f64 =
                ratio.parse().map_err(|e| usage(format!("key `noise.ratio`: {e}")))?;
            Some(NoiseConfig { start, ratio })
        }
        _ => return Err(usage("noise.start and noise.ratio must be set together")),
    };
    let seeds: Vec<u64> = match reader.take("seeds") {
        None => vec![0],
        Some(raw) => raw
            .split(',')
            .map(|v| v.trim().parse::<u64>().map_err(|e| usage(format!("key `seeds`: {e}"))))
            .collect::<Result<_>>()?,
    };
    let phase_boundary_override = match reader.take("phase.boundary") {
        None => None,
        Some(raw) => {
            Some(raw.parse::<usize>().map_err(|e| usage(format!("key `phase.boundary`: {e}")))?)
        }
    };
    let run = RunConfig {
        dataset,
        strategy,
        mode,
        rounds: reader.parse_required("rounds")?,
        initial_fraction: reader.parse("initial_fraction", 0.02)?,
        per_round_fraction: reader.parse("per_round_fraction", 0.02)?,
        train,
        distill_scope,
        noise,
        seeds,
        phase_boundary_override,
    };
    run.validate().map_err(|e| usage(format!("invalid config: {e}")))?;

    let workers = reader.parse(
        "workers",
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2),
    )?;
    let compare_threshold = reader.parse("compare.threshold", 1.0)?;

    if let Some(leftover) = reader.entries.keys().next() {
        return Err(usage(format!("unknown config key `{leftover}`")));
    }
    Ok(Resolved { run, workers, compare_threshold, sweep_axes })
}

/// Canonical echo of a resolved run: a config file that reproduces it.
pub fn to_dotted(run: &RunConfig, workers: usize) -> String {
    let mut lines: Vec<String> = Vec::new();
    lines.push(format!("dataset.name = {}", run.dataset.name));
    lines.push(format!("dataset.classes = {}", run.dataset.classes));
    lines.push(format!("dataset.dim = {}", run.dataset.dim));
    match &run.dataset.source {
        DataSource::Synth { n, sep } => {
            lines.push("dataset.source = synth".into());
            lines.push(format!("dataset.synth.n = {n}"));
            lines.push(format!("dataset.synth.sep = {sep}"));
        }
        DataSource::Csv { path } => {
            lines.push("dataset.source = csv".into());
            lines.push(format!("dataset.path = {path}"));
        }
    }
    lines.push(format!("dataset.split.train = {}", run.dataset.split.train));
    lines.push(format!("dataset.split.dev = {}", run.dataset.split.dev));
    lines.push(format!("dataset.split.test = {}", run.dataset.split.test));
    lines.push(format!("strategy = {}", run.strategy));
    lines.push(format!("mode = {}", run.mode));
    lines.push(format!("rounds = {}", run.rounds));
    lines.push(format!("initial_fraction = {}", run.initial_fraction));
    lines.push(format!("per_round_fraction = {}", run.per_round_fraction));
    lines.push(format!(
        "train.arch = {}",
        match run.train.arch {
            Arch::Linear => "linear",
            Arch::Mlp1 => "mlp1",
        }
    ));
    lines.push(format!("train.hidden = {}", run.train.hidden_dim));
    lines.push(format!("train.learning_rate = {}", run.train.learning_rate));
    lines.push(format!("train.epochs = {}", run.train.epochs));
    lines.push(format!("train.batch_size = {}", run.train.batch_size));
    lines.push(format!("train.alpha = {}", run.train.alpha));
    lines.push(format!(
        "distill.scope = {}",
        match run.distill_scope {
            DistillScope::All => "all",
            DistillScope::NewOnly => "new_only",
        }
    ));
    if let Some(noise) = &run.noise {
        match noise.start {
            NoiseStart::Phase => lines.push("noise.start = phase".into()),
            NoiseStart::Round(r) => lines.push(format!("noise.start = {r}")),
        }
        lines.push(format!("noise.ratio = {}", noise.ratio));
    }
    if let Some(boundary) = run.phase_boundary_override {
        lines.push(format!("phase.boundary = {boundary}"));
    }
    let seeds: Vec<String> = run.seeds.iter().map(|s| s.to_string()).collect();
    lines.push(format!("seeds = {}", seeds.join(",")));
    lines.push(format!("workers = {workers}"));
    lines.join("\n") + "\n"
}

/// Expand sweep axes into the cartesian product of override sets, paired
/// with a directory-friendly label.
pub fn sweep_grid(resolved: &Resolved) -> Result<Vec<(String, Vec<String>)>> {
    if resolved.sweep_axes.is_empty() {
        return Err(usage("sweep requires at least one `sweep.<key>` axis"));
    }
    let mut combos: Vec<(String, Vec<String>)> = vec![(String::new(), Vec::new())];
    for (key, values) in &resolved.sweep_axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for (label, overrides) in &combos {
            for value in values {
                let short = key.rsplit('.').next().unwrap_or(key);
                let piece = format!("{short}={value}");
                let new_label =
                    if label.is_empty() { piece.clone() } else { format!("{label}_{piece}") };
                let mut new_overrides = overrides.clone();
                new_overrides.push(format!("{key}={value}"));
                next.push((new_label, new_overrides));
            }
        }
        combos = next;
    }
    Ok(combos)
}

/// Parse text produced by [`to_dotted`] back into a resolved config.
pub fn resolve_echo(text: &str) -> Result<Resolved> {
    let raw = RawConfig::parse_str(text)?;
    resolve(&raw)
}

pub fn load(path: &Path, overrides: &[String]) -> Result<Resolved> {
    let mut raw = RawConfig::parse_file(path)?;
    raw.apply_overrides(overrides)?;
    resolve(&raw).with_context(|| format!("config {}", path.display()))
}
