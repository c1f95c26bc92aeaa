//! Run-directory writers. Every file is written atomically (temp file in
//! the target directory, then rename), so interrupted runs never leave
//! truncated reports behind.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use trustal_core::analysis::Comparison;
use trustal_core::engine::RunOutput;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn to_json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Timing and provenance metadata. This is the only place wall-clock
/// values appear in the outputs.
#[derive(Debug, Serialize)]
struct RunMeta {
    created_unix_ms: u128,
    duration_secs: f64,
    round_wall_times_secs: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct RunFile<'a> {
    report: &'a trustal_core::RunReport,
    config_text: &'a str,
    meta: RunMeta,
}

/// Write the full set of per-run outputs into `dir`:
/// `rounds.jsonl`, `run.json`, `accmatrix.csv`, `teacher_trace.csv`,
/// `splits.json`, and the `resolved.cfg` echo.
pub fn write_run_dir(
    dir: &Path,
    output: &RunOutput,
    config_text: &str,
    duration_secs: f64,
) -> Result<()> {
    let mut rounds = String::new();
    for round in &output.report.rounds {
        rounds.push_str(&serde_json::to_string(round)?);
        rounds.push('\n');
    }
    atomic_write(&dir.join("rounds.jsonl"), rounds.as_bytes())?;

    let meta = RunMeta {
        created_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        duration_secs,
        round_wall_times_secs: output.report.rounds.iter().map(|r| r.wall_time_secs).collect(),
    };
    let run_file = RunFile { report: &output.report, config_text, meta };
    atomic_write(&dir.join("run.json"), &to_json_pretty(&run_file)?)?;

    atomic_write(&dir.join("accmatrix.csv"), output.acc_matrix.to_csv_string().as_bytes())?;

    let mut trace = String::from("round,candidate_generation,score,chosen\n");
    for row in &output.teacher_trace {
        let score = row.score.map(|s| s.to_string()).unwrap_or_default();
        trace.push_str(&format!(
            "{},{},{},{}\n",
            row.round,
            row.candidate_generation,
            score,
            u8::from(row.chosen)
        ));
    }
    atomic_write(&dir.join("teacher_trace.csv"), trace.as_bytes())?;

    atomic_write(&dir.join("splits.json"), &to_json_pretty(&output.splits)?)?;
    atomic_write(&dir.join("resolved.cfg"), config_text.as_bytes())?;
    Ok(())
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn annotated(value: f64, delta: f64) -> String {
    format!("{value:.4}({delta:+.4})")
}

fn annotated_opt(value: Option<f64>, delta: Option<f64>) -> String {
    match (value, delta) {
        (Some(v), Some(d)) => annotated(v, d),
        (Some(v), None) => format!("{v:.4}"),
        _ => String::new(),
    }
}

/// Comparison table as CSV: raw per-phase means and deltas plus the
/// sign-annotated `value(+delta)` display columns.
pub fn comparison_csv(comparison: &Comparison) -> String {
    let mut out = String::from(
        "label,stable_accuracy,stable_mci,saturated_accuracy,saturated_mci,\
         delta_stable_accuracy,delta_stable_mci,delta_saturated_accuracy,delta_saturated_mci,\
         stable_accuracy_annotated,stable_mci_annotated,saturated_accuracy_annotated,\
         saturated_mci_annotated,rounds_to_threshold\n",
    );
    for row in &comparison.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.label,
            row.stable_accuracy,
            row.stable_mci,
            fmt_opt(row.saturated_accuracy),
            fmt_opt(row.saturated_mci),
            row.delta_stable_accuracy,
            row.delta_stable_mci,
            fmt_opt(row.delta_saturated_accuracy),
            fmt_opt(row.delta_saturated_mci),
            annotated(row.stable_accuracy, row.delta_stable_accuracy),
            annotated(row.stable_mci, row.delta_stable_mci),
            annotated_opt(row.saturated_accuracy, row.delta_saturated_accuracy),
            annotated_opt(row.saturated_mci, row.delta_saturated_mci),
            row.rounds_to_threshold.map(|r| r.to_string()).unwrap_or_default(),
        ));
    }
    out
}

/// Acquisition-quality table: one row per round.
pub fn quality_csv(uncertainty: &[f64], diversity: &[f64]) -> String {
    let mut out = String::from("round,mean_reference_entropy,cluster_entropy\n");
    for (i, (u, d)) in uncertainty.iter().zip(diversity).enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, u, d));
    }
    out
}

/// Default output root: `--out`, else `$TRUSTAL_OUT`, else `./runs`.
pub fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("TRUSTAL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
