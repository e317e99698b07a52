use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn jumplev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumplev"))
        .args(args)
        .env_remove("JUMPLEV_THREADS")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn simulate(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.path().join(name);
    let mut args = vec!["simulate", "--ticks", "--out", path_str(&out)];
    args.extend_from_slice(extra);
    let res = jumplev(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

/// Data rows of an event CSV.
fn event_rows(csv: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8(csv.to_vec())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const STUDY_GRID: [&str; 6] = ["--bins", "100", "--cutoff", "30", "--span", "8"];

#[test]
fn cojump_day_yields_one_negative_event() {
    let dir = TempDir::new().unwrap();
    let ticks = simulate(
        &dir,
        "day.csv",
        &["--seed", "1", "--price-jump", "-0.002", "--vol-jump", "1.16e-4", "--jump-time", "0.3713"],
    );
    let mut args = vec!["detect", path_str(&ticks)];
    args.extend_from_slice(&STUDY_GRID);
    let res = jumplev(&args);
    assert!(res.status.success());
    let rows = event_rows(&res.stdout);
    assert_eq!(rows.len(), 1, "{rows:?}");
    let tau: f64 = rows[0][2].parse().unwrap();
    let dx: f64 = rows[0][3].parse().unwrap();
    assert!((tau - 0.3713).abs() < 0.01);
    assert!(dx < 0.0);
    let vol_stat: f64 = rows[0][8].parse().unwrap();
    assert!(vol_stat > 0.0);
}

#[test]
fn flat_day_yields_no_events() {
    let dir = TempDir::new().unwrap();
    let ticks = simulate(&dir, "flat.csv", &["--seed", "1"]);
    let res = jumplev(&["detect", path_str(&ticks)]);
    assert!(res.status.success());
    assert!(event_rows(&res.stdout).is_empty());
}

#[test]
fn missing_file_exits_with_io_code() {
    let res = jumplev(&["detect", "/definitely/not/here.csv"]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("/definitely/not/here.csv"), "{err}");
}

#[test]
fn unsorted_ticks_name_the_row() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "time,logprice\n0.1,1\n0.2,1\n0.15,1\n").unwrap();
    let res = jumplev(&["ingest-check", path_str(&p), "--min-ticks", "3"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("row 4"));
}

#[test]
fn ingest_check_reports_rescaled_seconds() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("secs.csv");
    let mut text = String::from("time,logprice\n");
    for i in 0..=200 {
        text.push_str(&format!("{},{}\n", 34_200.0 + 117.0 * i as f64, 4.0 + 1e-4 * i as f64));
    }
    std::fs::write(&p, text).unwrap();
    let res = jumplev(&["ingest-check", path_str(&p)]);
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["ticks"], 201);
    assert_eq!(v["time_mapping"]["offset"], 34_200.0);
    assert_eq!(v["time_mapping"]["scale"], 23_400.0);
    assert_eq!(v["last_time"], 1.0);
}

#[test]
fn estimation_failure_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let ticks = simulate(&dir, "short.csv", &["--seed", "1", "--n", "120"]);
    let res = jumplev(&["detect", path_str(&ticks), "--bins", "400"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "sead = 4\n").unwrap();
    let res = jumplev(&["--config", path_str(&cfg), "simulate", "--n", "200"]);
    assert_eq!(res.status.code(), Some(2));
    let res = jumplev(&["simulate", "--n", "200", "--alpha", "2"]);
    assert_eq!(res.status.code(), Some(2));
    let res = Command::new(env!("CARGO_BIN_EXE_jumplev"))
        .args(["simulate", "--n", "200"])
        .env("JUMPLEV_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn flags_override_config_file_and_sidecar_records_it() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\nn = 500\nq = 0.001\n").unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let res = jumplev(&["--config", path_str(&cfg), "simulate", "--seed", "6", "--out", path_str(&a)]);
    assert!(res.status.success());
    let res = jumplev(&["simulate", "--seed", "6", "--n", "500", "--q", "0.001", "--out", path_str(&b)]);
    assert!(res.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let meta = |p: &Path| -> serde_json::Value {
        let side = format!("{}.meta.json", p.display());
        serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap()
    };
    let (ma, mb) = (meta(&a), meta(&b));
    assert_eq!(ma["seed"], 6);
    assert!((ma["time_scale"].as_f64().unwrap() - 1.0 / 6.5).abs() < 1e-12);
    assert_eq!(ma["config"]["n"], 500);
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(ma["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn tables_repeat_byte_for_byte_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let res = Command::new(env!("CARGO_BIN_EXE_jumplev"))
            .args(["mc-table1", "--reps", "3", "--seed", "17", "--out", path_str(&out)])
            .env("JUMPLEV_THREADS", threads)
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        std::fs::read(out).unwrap()
    };
    let one = run("1", "one.csv");
    let four = run("4", "four.csv");
    assert_eq!(one, four);
    let text = String::from_utf8(one).unwrap();
    assert!(text.starts_with("q,n,jump_multiple,"));
    assert_eq!(text.lines().count(), 25);
}

#[test]
fn dle_study_writes_summary_and_runs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("study.csv");
    let runs = dir.path().join("runs.csv");
    let res = jumplev(&[
        "mc-dle",
        "--reps",
        "3",
        "--sampling",
        "three-second",
        "--out",
        path_str(&out),
        "--runs-out",
        path_str(&runs),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let study = std::fs::read_to_string(&out).unwrap();
    assert!(study.starts_with("reps,failed,truth_scaled,bias"));
    assert_eq!(std::fs::read_to_string(&runs).unwrap().lines().count(), 4);
    assert!(dir.path().join("runs.csv.meta.json").exists());
}

#[test]
fn dle_rows_carry_scaled_and_raw_values() {
    let dir = TempDir::new().unwrap();
    let day = simulate(
        &dir,
        "d1.csv",
        &["--seed", "2", "--price-jump", "-0.002", "--vol-jump", "1.16e-4", "--jump-time", "0.3713"],
    );
    let mut args = vec!["dle", path_str(&day), "--significant-only", "true"];
    args.extend_from_slice(&STUDY_GRID);
    let res = jumplev(&args);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][1], rows[1][1]), ("all", "significant"));
    let raw: f64 = rows[0][3].parse().unwrap();
    let scaled: f64 = rows[0][4].parse().unwrap();
    assert!(raw < 0.0);
    assert!((scaled - raw * 1e7).abs() <= 1e-9 * scaled.abs());
}
