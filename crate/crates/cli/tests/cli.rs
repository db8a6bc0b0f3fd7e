use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stratum() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stratum"));
    cmd.env_remove("STRATUM_SEED");
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    stratum().args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_recording(path: &Path, seconds: usize) {
    let rate = 32;
    let mut text = String::from("t,acc,gyro,mag,label\n");
    for i in 0..seconds * rate {
        let t = i as f64 / rate as f64;
        let label = 1 + (i / (rate * 10)) % 2;
        text.push_str(&format!(
            "{t},{},{},{},{label}\n",
            (2.0 * t).sin() + label as f64,
            (5.0 * t).cos(),
            0.1 * t
        ));
    }
    fs::write(path, text).unwrap();
}

/// Synthetic domains `domain0.csv` (target) .. in `dir/d`.
fn synth(dir: &Path, shifts: &str) -> PathBuf {
    ok(&run(
        &["--seed", "4", "synth", "--classes", "3", "--dim", "6", "--samples-per-class", "15", "--shifts", shifts, "--out-dir", "d"],
        dir,
    ));
    dir.join("d")
}

#[test]
fn extract_writes_81_columns_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    write_recording(&dir.path().join("rec.csv"), 40);
    let out = ok(&run(
        &[
            "extract", "--input", "rec.csv", "--output", "feat.csv", "--schema", "acc,gyro,mag", "--window-seconds", "5",
            "--overlap", "0.5",
        ],
        dir.path(),
    ));
    assert!(out.contains("x 81 columns"), "{out}");
    let header = fs::read_to_string(dir.path().join("feat.csv")).unwrap();
    let first = header.lines().next().unwrap();
    assert_eq!(first.split(',').count(), 82);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("feat.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["window_seconds"], 5.0);
    assert_eq!(meta["overlap"], 0.5);
    assert_eq!(meta["columns"], 81);
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["extract", "--input", "absent.csv", "--output", "f.csv", "--schema", "a,b,c"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["extract", "--output", "f.csv", "--schema", "a,b,c"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn parse_errors_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "t,acc,gyro,mag,label\n0,1,2,3,1\n0.1,x,2,3,1\n").unwrap();
    let out = run(&["extract", "--input", "bad.csv", "--output", "f.csv", "--schema", "acc,gyro,mag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn select_source_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "0,0.5,4");
    let out = ok(&run(
        &["select-source", "--source", "d/domain1.csv", "--source", "d/domain2.csv", "--target", "d/domain0.csv", "--report", "sel.json"],
        dir.path(),
    ));
    let rows: Vec<&str> = out.lines().filter(|l| l.contains("d/domain")).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows.iter().filter(|l| l.ends_with('*')).count(), 1);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sel.json")).unwrap()).unwrap();
    assert_eq!(report["selected"], 0);
    assert_eq!(report["distance"], "stratified");

    let out = ok(&run(
        &["select-source", "--source", "d/domain2.csv", "--source", "d/domain1.csv", "--target", "d/domain0.csv", "--distance", "global"],
        dir.path(),
    ));
    assert!(out.contains("ranking by global distance"));
    assert!(out.contains("selected source 1"));
}

#[test]
fn duplicate_sources_pick_the_first() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "0,1");
    let out = ok(&run(
        &["select-source", "--source", "d/domain1.csv", "--source", "d/domain1.csv", "--target", "d/domain0.csv"],
        dir.path(),
    ));
    assert!(out.contains("selected source 0"));
}

#[test]
fn transfer_methods_write_one_label_per_row() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "0,2");
    ok(&run(
        &[
            "transfer", "--source", "d/domain1.csv", "--target", "d/domain0.csv", "--method", "stl-sat", "--m", "4", "--lambda",
            "1.0", "--kernel", "linear", "--iters", "10", "--output", "sat.csv", "--trace", "trace.csv",
        ],
        dir.path(),
    ));
    let labels = fs::read_to_string(dir.path().join("sat.csv")).unwrap();
    assert_eq!(labels.lines().count(), 46);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,labels_changed,objective,accuracy\n"));

    ok(&run(
        &["transfer", "--source", "d/domain1.csv", "--target", "d/domain0.csv", "--method", "tca", "--m", "4", "--output", "tca.csv"],
        dir.path(),
    ));
    assert_eq!(fs::read_to_string(dir.path().join("tca.csv")).unwrap().lines().count(), 46);
}

#[test]
fn evaluate_scores_and_appends() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "0,1");
    let out = ok(&run(
        &["evaluate", "--predictions", "d/domain0.csv", "--truth", "d/domain0.csv", "--emit", "table.csv", "--report", "r.json"],
        dir.path(),
    ));
    assert!(out.contains("accuracy 1.0000"));
    ok(&run(&["evaluate", "--predictions", "d/domain0.csv", "--truth", "d/domain0.csv", "--emit", "table.csv"], dir.path()));
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("task,method,accuracy,f1,seed,wall_time"));

    fs::write(dir.path().join("short.csv"), "row,label\n0,1\n1,2\n").unwrap();
    let out = run(&["evaluate", "--predictions", "short.csv", "--truth", "d/domain0.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "0,2");
    for k in 0..2 {
        ok(&run(
            &[
                "--seed", "9", "experiment", "--source", "d/domain1.csv", "--target", "d/domain0.csv", "--out-dir",
                &format!("run{k}"), "--emit", &format!("agg{k}.csv"), "--jobs", "2",
            ],
            dir.path(),
        ));
        ok(&run(
            &["--seed", "9", "transfer", "--source", "d/domain1.csv", "--target", "d/domain0.csv", "--m", "4", "--output", &format!("p{k}.csv"), "--trace", &format!("t{k}.csv")],
            dir.path(),
        ));
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("agg0.csv"), read("agg1.csv"));
    assert_eq!(read("p0.csv"), read("p1.csv"));
    assert_eq!(read("t0.csv"), read("t1.csv"));
    for m in ["source-only-1nn", "pca", "tca", "stl-sat"] {
        let name = format!("task_{m}_seed9.json");
        assert_eq!(read(&format!("run0/{name}")), read(&format!("run1/{name}")));
    }
}

#[test]
fn config_dump_round_trips_and_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let dumped = ok(&run(&["config", "dump"], dir.path()));
    fs::write(dir.path().join("run.toml"), &dumped).unwrap();
    let again = ok(&run(&["--config", "run.toml", "config", "dump"], dir.path()));
    assert_eq!(dumped, again);

    let out = stratum()
        .args(["config", "dump"])
        .env("STRATUM_SEED", "77")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(ok(&out).contains("seed = 77"));

    fs::write(dir.path().join("bad.toml"), "not_a_key = 1\n").unwrap();
    let out = run(&["--config", "bad.toml", "config", "dump"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
