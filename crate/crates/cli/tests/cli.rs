use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use segfire::Label;
use segfire_cli::manifest::{load_manifest, write_manifest, ManifestEntry, MissingPolicy, Origin};

fn segfire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segfire")).args(args).output().expect("spawn segfire")
}

fn ok(args: &[&str]) -> String {
    let out = segfire(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let entries = vec![
        ManifestEntry { path: "a.ppm".into(), label: Label::Fire, origin: Origin::Original },
        ManifestEntry { path: "b.ppm".into(), label: Label::NonFire, origin: Origin::Augmented },
    ];
    for e in &entries {
        std::fs::write(dir.path().join(&e.path), b"").unwrap();
    }
    let path = dir.path().join("manifest.csv");
    write_manifest(&entries, &path).unwrap();
    assert_eq!(load_manifest(&path, MissingPolicy::Fail).unwrap(), entries);
}

#[test]
fn unknown_label_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.ppm"), b"").unwrap();
    let path = dir.path().join("manifest.csv");
    std::fs::write(&path, "path,label,origin\na.ppm,smoke,original\n").unwrap();
    let err = load_manifest(&path, MissingPolicy::Fail).unwrap_err();
    assert!(format!("{err:#}").contains("smoke"));

    std::fs::write(&path, "path,label,origin\na.ppm,fire,original\ngone.ppm,nonfire,original\n").unwrap();
    assert!(load_manifest(&path, MissingPolicy::Fail).is_err());
    assert_eq!(load_manifest(&path, MissingPolicy::WarnSkip).unwrap().len(), 1);

    std::fs::write(&path, "file,label,origin\na.ppm,fire,original\n").unwrap();
    assert!(load_manifest(&path, MissingPolicy::Fail).is_err());
}

#[test]
fn synth_zero_writes_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--count", "0", "--out", s(dir.path())]);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.trim(), "path,label,origin");
}

#[test]
fn eval_predictions_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("metrics.json");
    let stdout = ok(&["eval", "--predictions", s(&fixture("predictions_441.csv")), "--out", s(&json)]);
    assert!(stdout.contains("TP 235 TN 198 FP 5 FN 3 (n = 441)"), "{stdout}");
    assert!(stdout.contains("accuracy   0.981859 (433/441)"), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!((v["metrics"]["accuracy"].as_f64().unwrap() - 433.0 / 441.0).abs() < 1e-12);
    assert!((v["metrics"]["precision"].as_f64().unwrap() - 235.0 / 240.0).abs() < 1e-12);
}

#[test]
fn complexity_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["complexity", "--pool-mode", "preserve", "--out", s(dir.path())]);
    assert!(stdout.contains("2457616"), "{stdout}");
    let layers = std::fs::read_to_string(dir.path().join("layers.csv")).unwrap();
    let params: Vec<&str> = layers.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(params, ["896", "18496", "73856", "2457616", "272", "17"]);
    let cells = std::fs::read_to_string(dir.path().join("discrepancies.csv")).unwrap();
    assert_eq!(cells.lines().count(), 25);
}

#[test]
fn bench_csv_rows() {
    let out = ok(&["bench", "--batch-sizes", "1,2", "--repetitions", "1"]);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let seg: f64 = r[2].parse().unwrap();
        let img: f64 = r[3].parse().unwrap();
        assert!((img - 12.0 * seg).abs() <= 1e-9 * img.max(1.0));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(segfire(&["complexity", "--batch-size", "0"]).status.code(), Some(2));
    assert_eq!(segfire(&["complexity", "--input", "12by7"]).status.code(), Some(2));
    assert_eq!(segfire(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(segfire(&["eval", "--predictions", "/nonexistent.csv"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "epochs = 3\nlearning_rate = 0.1\n").unwrap();
    let out = segfire(&["--config", s(&cfg), "complexity"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn train_infer_and_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiles");
    let frames = dir.path().join("frames");
    let weights = dir.path().join("model.segw");
    let history = dir.path().join("history.csv");
    ok(&["synth", "--count", "8", "--seed", "3", "--out", s(&data)]);
    ok(&["synth", "--count", "2", "--kind", "frames", "--out", s(&frames)]);
    let manifest = data.join("manifest.csv");
    ok(&["train", "--manifest", s(&manifest), "--weights", s(&weights), "--epochs", "1", "--batch-size", "4", "--out", s(&history)]);
    let hist = std::fs::read_to_string(&history).unwrap();
    assert_eq!(hist.lines().count(), 2, "{hist}");

    let stdout = ok(&["infer", "--weights", s(&weights), s(&data.join("images/000000.ppm"))]);
    assert!(stdout.starts_with("fire ") || stdout.starts_with("nonfire "), "{stdout}");

    let stdout = ok(&["eval", "--manifest", s(&manifest), "--weights", s(&weights)]);
    assert!(stdout.contains("(n = 8)"));

    let log = dir.path().join("events.jsonl");
    ok(&["pipeline", "--weights", s(&weights), "--frames", s(&frames.join("images")), "--keep-every", "1", "--out", s(&log)]);
    let events: Vec<serde_json::Value> =
        std::fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.len(), 2);
    assert_eq!(events[1]["frame"], 1);
    assert!(events.iter().all(|e| e["decisions"]["verdicts"].as_array().unwrap().len() == 12));
}

#[test]
fn small_sweep_marks_infeasible_depths() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiles");
    ok(&["synth", "--count", "4", "--out", s(&data)]);
    let manifest = data.join("manifest.csv");
    let out = ok(&[
        "sweep", "--manifest", s(&manifest), "--test-manifest", s(&manifest), "--conv", "5,10", "--dense", "1",
        "--epochs", "1", "--batch-size", "4",
    ]);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let header = reader.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][col("feasible")], "true");
    // Downsampled stack ends at 8 x 10 x 128; one hidden 16-unit layer, then the output.
    let params = 896 + 18_496 + 73_856 + (8 * 10 * 128 * 16 + 16) + 17;
    assert_eq!(rows[0][col("params")], params.to_string());
    assert_eq!(&rows[1][col("feasible")], "false");
}
