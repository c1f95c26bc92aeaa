//! End-to-end tests of the `trustal` binary: exit codes, output files,
//! determinism, and the documented override behavior.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn trustal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustal"))
        .args(args)
        .current_dir(dir)
        .env_remove("TRUSTAL_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "\
dataset.name = smoke
dataset.source = synth
dataset.classes = 3
dataset.dim = 3
dataset.synth.n = 200
dataset.synth.sep = 4.0
strategy = conf
mode = baseline
rounds = 3
initial_fraction = 0.05
per_round_fraction = 0.05
train.epochs = 4
train.learning_rate = 0.05
seeds = 7
workers = 2
";

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = trustal(&["run", "--config", "nope.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_key_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", &format!("{SMALL}mystery.knob = 3\n"));
    let out = trustal(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery.knob"));
}

#[test]
fn run_writes_all_outputs_and_prints_round_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.cfg", SMALL);
    let out = trustal(
        &["run", "--config", cfg.to_str().unwrap(), "--out", "out"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("round ").count(), 3, "{stdout}");
    let seed_dir = tmp.path().join("out/seed_7");
    for file in ["rounds.jsonl", "run.json", "accmatrix.csv", "teacher_trace.csv", "splits.json", "resolved.cfg"]
    {
        assert!(seed_dir.join(file).exists(), "missing {file}");
    }
    let rounds = std::fs::read_to_string(seed_dir.join("rounds.jsonl")).unwrap();
    assert_eq!(rounds.lines().count(), 3);
}

fn strip_meta(run_json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(run_json).unwrap();
    v.as_object_mut().unwrap().remove("meta");
    v
}

#[test]
fn identical_invocations_are_byte_identical_outside_run_json_meta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "det.cfg", SMALL);
    for out_dir in ["a", "b"] {
        let out = trustal(
            &["run", "--config", cfg.to_str().unwrap(), "--out", out_dir],
            tmp.path(),
        );
        assert_eq!(out.status.code(), Some(0));
    }
    for file in ["rounds.jsonl", "accmatrix.csv", "teacher_trace.csv", "splits.json", "resolved.cfg"]
    {
        let a = std::fs::read(tmp.path().join("a/seed_7").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b/seed_7").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let a = std::fs::read_to_string(tmp.path().join("a/seed_7/run.json")).unwrap();
    let b = std::fs::read_to_string(tmp.path().join("b/seed_7/run.json")).unwrap();
    assert_eq!(strip_meta(&a), strip_meta(&b));
}

#[test]
fn rerunning_from_the_resolved_echo_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "echo.cfg", SMALL);
    let out = trustal(
        &["run", "--config", cfg.to_str().unwrap(), "--out", "first"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let echo = tmp.path().join("first/seed_7/resolved.cfg");
    let out = trustal(
        &["run", "--config", echo.to_str().unwrap(), "--out", "second"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(tmp.path().join("first/seed_7/rounds.jsonl")).unwrap();
    let b = std::fs::read(tmp.path().join("second/seed_7/rounds.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn alpha_zero_override_matches_baseline_rounds() {
    let tmp = tempfile::tempdir().unwrap();
    let distilled_cfg = SMALL.replace("mode = baseline", "mode = trustal_mc");
    let cfg_t = write_config(tmp.path(), "t.cfg", &distilled_cfg);
    let cfg_b = write_config(tmp.path(), "b.cfg", SMALL);
    let out = trustal(
        &[
            "run",
            "--config",
            cfg_t.to_str().unwrap(),
            "--out",
            "t",
            "--override",
            "train.alpha=0",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let out = trustal(&["run", "--config", cfg_b.to_str().unwrap(), "--out", "b"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let strip = |path: PathBuf| -> Vec<serde_json::Value> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|line| {
                let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
                let obj = v.as_object_mut().unwrap();
                obj.remove("teacher_generation");
                obj.remove("teacher_score");
                v
            })
            .collect()
    };
    assert_eq!(
        strip(tmp.path().join("t/seed_7/rounds.jsonl")),
        strip(tmp.path().join("b/seed_7/rounds.jsonl"))
    );
}

#[test]
fn sweep_produces_one_directory_per_grid_point_plus_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_text = SMALL.replace("mode = baseline", "mode = trustal_mc")
        + "sweep.train.alpha = 0.3,0.75,1.5,10,20\ntrain.epochs = 2\nrounds = 2\n";
    let cfg = write_config(tmp.path(), "sweep.cfg", &cfg_text);
    let out = trustal(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", "grid"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let root = tmp.path().join("grid");
    let mut combo_dirs: Vec<String> = std::fs::read_dir(&root)
        .unwrap()
        .filter_map(|e| {
            let e = e.unwrap();
            e.file_type().unwrap().is_dir().then(|| e.file_name().to_string_lossy().to_string())
        })
        .collect();
    combo_dirs.sort();
    assert_eq!(combo_dirs.len(), 6, "{combo_dirs:?}"); // 5 alphas + shared baseline
    assert!(combo_dirs.contains(&"baseline".to_string()));
    assert!(root.join("compare.csv").exists());
    for dir in &combo_dirs {
        assert!(root.join(dir).join("seed_7/run.json").exists());
    }
}

#[test]
fn sweep_without_axes_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "nosweep.cfg", SMALL);
    let out = trustal(&["sweep", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_requires_two_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "one.cfg", SMALL);
    let out = trustal(&["run", "--config", cfg.to_str().unwrap(), "--out", "one"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let out = trustal(&["compare", "one/seed_7"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_two_runs_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "base.cfg", SMALL);
    let out = trustal(&["run", "--config", cfg.to_str().unwrap(), "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let out = trustal(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "y",
            "--override",
            "mode=trustal_mc",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let out = trustal(
        &["compare", "--out", "cmp", "x/seed_7", "y/seed_7"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(tmp.path().join("cmp/compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 3); // header + 2 rows
    assert!(table.lines().nth(1).unwrap().starts_with("baseline/conf/7"));
}

#[test]
fn analyze_writes_quality_rows_per_round() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "an.cfg", SMALL);
    let out = trustal(&["run", "--config", cfg.to_str().unwrap(), "--out", "an"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let out = trustal(&["analyze", "--run", "an/seed_7"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(tmp.path().join("an/seed_7/quality.csv")).unwrap();
    assert_eq!(table.lines().count(), 4); // header + 3 rounds
}

#[test]
fn synth_writes_a_loadable_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "synth.cfg", SMALL);
    let out = trustal(&["synth", "--config", cfg.to_str().unwrap(), "--out", "data"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv_path = tmp.path().join("data/smoke.csv");
    assert!(csv_path.exists());
    // The emitted file round-trips through the CSV loader.
    let csv_cfg = format!(
        "dataset.name = smoke\ndataset.source = csv\ndataset.path = {}\n\
         dataset.classes = 3\ndataset.dim = 3\nrounds = 2\ntrain.epochs = 2\nseeds = 7\n",
        csv_path.display()
    );
    let cfg2 = write_config(tmp.path(), "fromcsv.cfg", &csv_cfg);
    let out = trustal(&["run", "--config", cfg2.to_str().unwrap(), "--out", "csvrun"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
