//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

use trustal_core::analysis::{
    compare_runs, diversity_quality, kmeans, train_reference, uncertainty_quality,
};
use trustal_core::data::DataSource;
use trustal_core::engine::{self, Mode, RunConfig, RunJob, RunOutput};
use trustal_core::{Dataset, RunReport};

use crate::config::{self, load, resolve, sweep_grid, usage, RawConfig, Resolved};
use crate::output::{self, atomic_write, comparison_csv, quality_csv, write_run_dir};

fn round_summary(seed: u64, total_rounds: usize, round: &trustal_core::RoundReport) -> String {
    let teacher = round
        .teacher_generation
        .map(|g| format!(" teacher=gen{g}"))
        .unwrap_or_default();
    let noise = if round.corrupted_ids.is_empty() {
        String::new()
    } else {
        format!(" corrupted={}", round.corrupted_ids.len())
    };
    format!(
        "[seed {seed}] round {:>2}/{} labeled {:>5.1}% val {:.3} test {:.3} mci {:.3}{teacher}{noise}",
        round.round,
        total_rounds,
        100.0 * round.labeled_fraction,
        round.val_accuracy,
        round.test_accuracy,
        round.mci,
    )
}

fn execute_and_write(
    run: &RunConfig,
    seed: u64,
    dir: &Path,
    config_text: &str,
    verbose: bool,
) -> Result<RunOutput> {
    let started = Instant::now();
    let output = engine::run_single(run, seed)?;
    write_run_dir(dir, &output, config_text, started.elapsed().as_secs_f64())?;
    for round in &output.report.rounds {
        println!("{}", round_summary(seed, run.rounds, round));
    }
    if output.report.truncated {
        println!("[seed {seed}] unlabeled pool exhausted; run truncated");
    }
    if verbose {
        println!(
            "[seed {seed}] phase boundary {} mean pairwise consistency {:.4} outputs {}",
            output.report.phase_boundary,
            output.report.mean_pairwise_correct_consistency,
            dir.display()
        );
    }
    Ok(output)
}

/// `run`: execute the configured run for every seed and write one output
/// directory per seed.
pub fn cmd_run(
    config_path: &Path,
    out: Option<PathBuf>,
    overrides: &[String],
    verbose: bool,
) -> Result<()> {
    let resolved = load(config_path, overrides)?;
    let root = output::output_root(out);
    let config_text = config::to_dotted(&resolved.run, resolved.workers);
    for &seed in &resolved.run.seeds {
        let dir = root.join(format!("seed_{seed}"));
        execute_and_write(&resolved.run, seed, &dir, &config_text, verbose)?;
    }
    println!("wrote {} run(s) under {}", resolved.run.seeds.len(), root.display());
    Ok(())
}

/// Strip the alpha axis from a combo label, leaving the pieces that still
/// distinguish baseline companions.
fn baseline_label(combo_label: &str) -> String {
    let rest: Vec<&str> =
        combo_label.split('_').filter(|piece| !piece.starts_with("alpha=")).collect();
    if rest.is_empty() {
        "baseline".to_string()
    } else {
        format!("baseline_{}", rest.join("_"))
    }
}

/// `sweep`: cartesian product of the sweep axes times seeds, executed on a
/// bounded worker pool, each with a stand-alone baseline companion for the
/// delta columns, plus an aggregate `compare.csv`.
pub fn cmd_sweep(
    config_path: &Path,
    out: Option<PathBuf>,
    overrides: &[String],
    verbose: bool,
) -> Result<()> {
    let mut base_raw = RawConfig::parse_file(config_path)?;
    base_raw.apply_overrides(overrides)?;
    let base = resolve(&base_raw)?;
    let grid = sweep_grid(&base)?;
    let root = output::output_root(out);

    // Resolve each combo, then its baseline companion (deduplicated).
    let mut combos: Vec<(String, Resolved)> = Vec::new();
    let mut baselines: BTreeMap<String, Resolved> = BTreeMap::new();
    let mut combo_to_baseline: BTreeMap<String, String> = BTreeMap::new();
    for (label, combo_overrides) in &grid {
        let mut raw = base_raw.clone();
        raw.apply_overrides(combo_overrides)?;
        let resolved = resolve(&raw).with_context(|| format!("sweep combo `{label}`"))?;
        let bl_label = if resolved.run.mode == Mode::Baseline {
            label.clone()
        } else {
            let bl_label = baseline_label(label);
            if !baselines.contains_key(&bl_label) {
                let mut bl_raw = base_raw.clone();
                let retained: Vec<String> = combo_overrides
                    .iter()
                    .filter(|o| !o.starts_with("train.alpha="))
                    .cloned()
                    .collect();
                bl_raw.apply_overrides(&retained)?;
                bl_raw.insert("mode", "baseline".to_string());
                let bl = resolve(&bl_raw).with_context(|| format!("baseline for `{label}`"))?;
                baselines.insert(bl_label.clone(), bl);
            }
            bl_label
        };
        combo_to_baseline.insert(label.clone(), bl_label);
        combos.push((label.clone(), resolved));
    }

    let mut jobs: Vec<RunJob> = Vec::new();
    let all_runs = combos
        .iter()
        .map(|(l, r)| (l, r))
        .chain(baselines.iter());
    for (label, resolved) in all_runs {
        for &seed in &resolved.run.seeds {
            jobs.push(RunJob {
                label: format!("{label}/seed_{seed}"),
                config: resolved.run.clone(),
                seed,
            });
        }
    }
    println!("sweep: {} combos, {} baselines, {} jobs", combos.len(), baselines.len(), jobs.len());
    let results = engine::run_batch(jobs, base.workers);
    let mut outputs: BTreeMap<String, Vec<RunOutput>> = BTreeMap::new();
    for (job, result) in results {
        let output = result.with_context(|| format!("job `{}`", job.label))?;
        let dir = root.join(&job.label);
        let config_text = config::to_dotted(&job.config, base.workers);
        write_run_dir(&dir, &output, &config_text, 0.0)?;
        if verbose {
            println!("finished {}", job.label);
        }
        let combo = job.label.rsplit_once("/seed_").map(|(c, _)| c.to_string()).unwrap();
        outputs.entry(combo).or_default().push(output);
    }

    let mut csv = String::from(
        "combo,seeds,stable_accuracy,stable_mci,saturated_accuracy,saturated_mci,\
         delta_stable_accuracy,delta_stable_mci,delta_saturated_accuracy,delta_saturated_mci,\
         stable_accuracy_annotated,stable_mci_annotated,saturated_accuracy_annotated,\
         saturated_mci_annotated\n",
    );
    for (label, _) in &combos {
        let bl_label = &combo_to_baseline[label];
        let mine = phase_means(&outputs[label]);
        let base_means = phase_means(&outputs[bl_label]);
        csv.push_str(&sweep_row(label, outputs[label].len(), &mine, &base_means));
    }
    for label in baselines.keys() {
        let mine = phase_means(&outputs[label]);
        csv.push_str(&sweep_row(label, outputs[label].len(), &mine, &mine));
    }
    atomic_write(&root.join("compare.csv"), csv.as_bytes())?;
    println!("wrote aggregate {}", root.join("compare.csv").display());
    Ok(())
}

/// Seed-averaged per-phase means: (stable acc, stable mci, saturated acc,
/// saturated mci). Saturated means average over the seeds that have a
/// saturated phase.
pub fn phase_means(outputs: &[RunOutput]) -> (f64, f64, Option<f64>, Option<f64>) {
    let n = outputs.len() as f64;
    let stable_acc = outputs.iter().map(|o| o.report.phases.stable_accuracy).sum::<f64>() / n;
    let stable_mci = outputs.iter().map(|o| o.report.phases.stable_mci).sum::<f64>() / n;
    let sat: Vec<(f64, f64)> = outputs
        .iter()
        .filter_map(|o| o.report.phases.saturated_accuracy.zip(o.report.phases.saturated_mci))
        .collect();
    let (sat_acc, sat_mci) = if sat.is_empty() {
        (None, None)
    } else {
        let m = sat.len() as f64;
        (
            Some(sat.iter().map(|(a, _)| a).sum::<f64>() / m),
            Some(sat.iter().map(|(_, b)| b).sum::<f64>() / m),
        )
    };
    (stable_acc, stable_mci, sat_acc, sat_mci)
}

fn sweep_row(
    label: &str,
    seeds: usize,
    mine: &(f64, f64, Option<f64>, Option<f64>),
    base: &(f64, f64, Option<f64>, Option<f64>),
) -> String {
    let (sa, sm, ta, tm) = *mine;
    let (bsa, bsm, bta, btm) = *base;
    let delta_sat_acc = ta.zip(bta).map(|(a, b)| a - b);
    let delta_sat_mci = tm.zip(btm).map(|(a, b)| a - b);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let ann = |v: f64, d: f64| format!("{v:.4}({d:+.4})");
    let ann_opt = |v: Option<f64>, d: Option<f64>| match (v, d) {
        (Some(v), Some(d)) => ann(v, d),
        (Some(v), None) => format!("{v:.4}"),
        _ => String::new(),
    };
    format!(
        "{label},{seeds},{sa},{sm},{},{},{},{},{},{},{},{},{},{}\n",
        opt(ta),
        opt(tm),
        sa - bsa,
        sm - bsm,
        opt(delta_sat_acc),
        opt(delta_sat_mci),
        ann(sa, sa - bsa),
        ann(sm, sm - bsm),
        ann_opt(ta, delta_sat_acc),
        ann_opt(tm, delta_sat_mci),
    )
}

/// Load the report back out of a run directory.
pub fn load_report(dir: &Path) -> Result<(RunReport, String)> {
    let path = dir.join("run.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let report: RunReport = serde_json::from_value(
        value.get("report").cloned().ok_or_else(|| usage("run.json has no `report`"))?,
    )?;
    let config_text = value
        .get("config_text")
        .and_then(|v| v.as_str())
        .ok_or_else(|| usage("run.json has no `config_text`"))?
        .to_string();
    Ok((report, config_text))
}

/// `analyze`: acquisition-quality metrics for one finished run, written as
/// `quality.csv` next to its other outputs.
pub fn cmd_analyze(run_dir: &Path) -> Result<()> {
    let (report, config_text) = load_report(run_dir)?;
    let resolved = config::resolve_echo(&config_text)?;
    let (dataset, pool) = Dataset::from_spec(&resolved.run.dataset, report.seed)?;
    let reference = train_reference(&dataset, &pool, &resolved.run.train, report.seed)?;
    let clusters = kmeans(&reference.embeddings, report.budget_per_round, report.seed, 100)?;
    let selected: Vec<Vec<trustal_core::SampleId>> =
        report.rounds.iter().map(|r| r.acquired_ids.clone()).collect();
    let uncertainty = uncertainty_quality(&reference, &dataset, &selected)?;
    let diversity = diversity_quality(&reference, &clusters, &selected)?;
    atomic_write(&run_dir.join("quality.csv"), quality_csv(&uncertainty, &diversity).as_bytes())?;
    println!("wrote {}", run_dir.join("quality.csv").display());
    Ok(())
}

/// `compare`: comparison table across finished run directories.
pub fn cmd_compare(
    dirs: &[PathBuf],
    out: Option<PathBuf>,
    baseline: usize,
    threshold: f64,
) -> Result<()> {
    if dirs.len() < 2 {
        return Err(usage(format!("compare needs at least 2 run directories, got {}", dirs.len())));
    }
    let reports: Vec<RunReport> =
        dirs.iter().map(|d| Ok(load_report(d)?.0)).collect::<Result<_>>()?;
    let comparison = compare_runs(&reports, baseline, threshold)
        .map_err(|e| usage(format!("comparison failed: {e}")))?;
    let root = output::output_root(out);
    std::fs::create_dir_all(&root)?;
    let path = root.join("compare.csv");
    atomic_write(&path, comparison_csv(&comparison).as_bytes())?;
    println!(
        "baseline {} plateau {:.4} target {:.4}",
        comparison.baseline, comparison.baseline_plateau, comparison.target_accuracy
    );
    println!("wrote {}", path.display());
    Ok(())
}

/// `synth`: materialize a synthetic dataset as a loadable CSV file.
pub fn cmd_synth(config_path: &Path, out: Option<PathBuf>, overrides: &[String]) -> Result<()> {
    let resolved = load(config_path, overrides)?;
    let spec = &resolved.run.dataset;
    let DataSource::Synth { n, sep } = spec.source else {
        return Err(usage("synth requires dataset.source = synth"));
    };
    let seed = resolved.run.seeds[0];
    let samples = trustal_core::data::synth_blobs(
        n,
        spec.classes,
        spec.dim,
        sep,
        trustal_core::rng::derive(seed, "synth", 0),
    )?;
    let mut csv = String::from("id,label");
    for j in 1..=spec.dim {
        csv.push_str(&format!(",f{j}"));
    }
    csv.push('\n');
    for sample in &samples {
        csv.push_str(&format!("{},{}", sample.id, sample.true_label));
        for v in &sample.features {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    let root = output::output_root(out);
    std::fs::create_dir_all(&root)?;
    let path = root.join(format!("{}.csv", spec.name));
    atomic_write(&path, csv.as_bytes())?;
    println!("wrote {} samples to {}", samples.len(), path.display());
    Ok(())
}
