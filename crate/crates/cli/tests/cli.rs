//! End-to-end checks of the installed binary: artifact layout, exit
//! codes, and byte-level determinism of everything it writes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn svspipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svspipe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = svspipe(args);
    assert!(
        out.status.success(),
        "svspipe {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {path:?}: {e}"))
}

#[test]
fn simulate_writes_frames_and_truth() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["simulate", "--scene", "single_car", "--out", out, "--bitmaps"]);

    let frames: Vec<_> = fs::read_dir(dir.path().join("frames")).unwrap().collect();
    assert_eq!(frames.len(), 46);
    let bitmaps: Vec<_> = fs::read_dir(dir.path().join("bitmaps")).unwrap().collect();
    assert_eq!(bitmaps.len(), 46);

    let truth = read_json(&dir.path().join("truth.json"));
    assert_eq!(truth["car"], 1);
    assert_eq!(truth["pedestrian"], 0);
}

#[test]
fn scene_run_reports_exact_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["run", "--scene", "car_and_pedestrians", "--out", out]);

    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["counts"]["car"], 1);
    assert_eq!(report["counts"]["pedestrian"], 2);
    // Scene truth feeds the evaluation without an explicit --truth.
    assert_eq!(report["eval"]["car"]["error"], 0.0);
    assert_eq!(report["eval"]["pedestrian"]["error"], 0.0);
    assert!(report["alarms"].as_u64().unwrap() >= 2);

    for name in ["events.jsonl", "ops.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn identical_runs_write_identical_artifacts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        run_ok(&["run", "--scene", "pedestrian_street", "--out", dir.path().to_str().unwrap()]);
    }
    for name in ["events.jsonl", "ops.json", "report.json"] {
        let left = fs::read(a.path().join(name)).unwrap();
        let right = fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical runs");
    }
}

#[test]
fn stored_frames_replay_the_scene_run() {
    let sim = TempDir::new().unwrap();
    let sim_out = sim.path().to_str().unwrap();
    run_ok(&["simulate", "--scene", "single_car", "--out", sim_out]);

    // Stored-frame runs default to the stock configuration; the scenes
    // need the slow-adaptation settings, so pass them explicitly.
    let cfg_path = sim.path().join("config.json");
    fs::write(&cfg_path, r#"{"sensor": {"alpha": 0.01}}"#).unwrap();

    let from_files = TempDir::new().unwrap();
    run_ok(&[
        "run",
        "--input",
        sim.path().join("frames").to_str().unwrap(),
        "--truth",
        sim.path().join("truth.json").to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        from_files.path().to_str().unwrap(),
    ]);

    let from_scene = TempDir::new().unwrap();
    run_ok(&["run", "--scene", "single_car", "--out", from_scene.path().to_str().unwrap()]);

    let a = fs::read(from_files.path().join("events.jsonl")).unwrap();
    let b = fs::read(from_scene.path().join("events.jsonl")).unwrap();
    assert_eq!(a, b, "stored frames and direct rendering diverged");

    let report = read_json(&from_files.path().join("report.json"));
    assert_eq!(report["eval"]["car"]["error"], 0.0);
}

#[test]
fn full_size_scene_run_matches_small_grid_run() {
    let small = TempDir::new().unwrap();
    let full = TempDir::new().unwrap();
    run_ok(&["run", "--scene", "single_car", "--out", small.path().to_str().unwrap()]);
    run_ok(&["run", "--scene", "single_car", "--vga", "--out", full.path().to_str().unwrap()]);

    let a = fs::read(small.path().join("events.jsonl")).unwrap();
    let b = fs::read(full.path().join("events.jsonl")).unwrap();
    assert_eq!(a, b, "full-size path changed the tracking outcome");

    // The full-size path pays for subsampling; everything downstream is
    // unchanged, so only the sensor stage may differ.
    let small_ops = read_json(&small.path().join("ops.json"));
    let full_ops = read_json(&full.path().join("ops.json"));
    assert_eq!(small_ops["totals"]["detect"], full_ops["totals"]["detect"]);
    assert!(
        full_ops["totals"]["sensor"]["memory"].as_u64().unwrap()
            > small_ops["totals"]["sensor"]["memory"].as_u64().unwrap()
    );
}

#[test]
fn continuous_flag_delivers_every_frame() {
    let dir = TempDir::new().unwrap();
    run_ok(&["run", "--scene", "single_car", "--continuous", "--out", dir.path().to_str().unwrap()]);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["delivered_frames"], 46);
}

#[test]
fn train_writes_a_loadable_model() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(&["train", "--out", dir.path().to_str().unwrap(), "--dump-data"]);

    let model = svspipe::SvmModel::load(&dir.path().join("model.json")).expect("model loads");
    model.validate().expect("model validates");
    assert!(dir.path().join("dataset.csv").exists());

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("held-out accuracy"), "stdout: {stdout}");
}

#[test]
fn explain_writes_deterministic_csvs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["train", "--out", out]);
    let model = dir.path().join("model.json");

    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        run_ok(&["explain", "--model", model.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    }

    let imp = fs::read_to_string(a.path().join("importance.csv")).unwrap();
    assert_eq!(imp.lines().count(), 5, "header plus one row per feature");
    let ale = fs::read_to_string(a.path().join("ale_area_var_y.csv")).unwrap();
    assert_eq!(ale.lines().count(), 101, "header plus a 10x10 grid");

    for name in ["importance.csv", "ale_area_var_y.csv"] {
        let left = fs::read(a.path().join(name)).unwrap();
        let right = fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical runs");
    }
}

#[test]
fn bench_reports_detect_cost_share() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(&["bench", "--scene", "single_car", "--out", dir.path().to_str().unwrap()]);

    let ops = read_json(&dir.path().join("ops.json"));
    let total = |v: &serde_json::Value| {
        v["comparisons"].as_u64().unwrap() + v["arithmetic"].as_u64().unwrap() + v["memory"].as_u64().unwrap()
    };
    let detect = total(&ops["totals"]["detect"]);
    let baseline = total(&ops["totals"]["cc_baseline"]);
    assert!(baseline > 0);
    assert!((detect as f64) < 0.2 * baseline as f64, "detect {detect} vs baseline {baseline}");

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("labeling baseline"), "stdout: {stdout}");
}

#[test]
fn detect_reads_a_bitmap_and_writes_a_report() {
    let sim = TempDir::new().unwrap();
    run_ok(&["simulate", "--scene", "single_car", "--bitmaps", "--out", sim.path().to_str().unwrap()]);

    let dir = TempDir::new().unwrap();
    run_ok(&[
        "detect",
        "--input",
        sim.path().join("bitmaps").join("frame_0005.pbm").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);

    let report = read_json(&dir.path().join("detect.json"));
    assert_eq!(report["proposals"].as_array().unwrap().len(), 1);
    assert_eq!(report["comparison"]["mean_iou"], 1.0);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let unknown_scene = svspipe(&["run", "--scene", "no_such_scene", "--out", "/tmp"]);
    assert_eq!(unknown_scene.status.code(), Some(2));
    let stderr = String::from_utf8(unknown_scene.stderr).unwrap();
    assert!(stderr.contains("no_such_scene"), "stderr: {stderr}");

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"version": 9}"#).unwrap();
    let bad_config = svspipe(&[
        "run",
        "--scene",
        "single_car",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(bad_config.status.code(), Some(2));

    let missing_model = svspipe(&["explain", "--model", "/no/such/model.json"]);
    assert_eq!(missing_model.status.code(), Some(2));
}
