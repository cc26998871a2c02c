use std::path::Path;

use clap::Parser;
use trackpool::cli::{execute, Cli};
use trackpool::mot::read_mot;

const SMALL: &str = r#"{
  "train": {"optimizer": "adam", "epochs": 1, "iterations_per_epoch": 12, "lr_milestones": []},
  "sim": {"frames": 25, "num_targets": 4}
}"#;

fn run(args: &[&str]) -> Result<String, trackpool::Error> {
    let cli = Cli::try_parse_from(std::iter::once("trackpool").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    execute(&cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_train_track_eval() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("small.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let data = root.join("data");
    let work = root.join("work");

    run(&["simulate", "--config", s(&cfg), "--seed", "4", "--out", s(&data), "--sequences", "2"]).unwrap();
    let seq = data.join("sim-000");
    for f in ["seqinfo.ini", "gt/gt.txt", "det/det.txt", "det/emb.txt", "scenario.json"] {
        assert!(seq.join(f).exists(), "{f}");
    }

    let text = run(&["train", "--config", s(&cfg), "--seed", "4", "--out", s(&work), "--data", s(&seq)]).unwrap();
    assert!(text.contains("trained 12 iterations"), "{text}");
    let log = std::fs::read_to_string(work.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "iter,phase,loss,lr,dropout");
    assert_eq!(log.lines().count(), 13);
    let model = work.join("model.ckpt");

    let seq1 = data.join("sim-001");
    let tracked = root.join("tracked");
    run(&["track", "--config", s(&cfg), "--out", s(&tracked), "--model", s(&model), "--data", s(&seq), s(&seq1)]).unwrap();
    let rows = read_mot(&tracked.join("sim-000.txt")).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| (w[0].frame, w[0].id) < (w[1].frame, w[1].id)));
    let timing = std::fs::read_to_string(tracked.join("timing.json")).unwrap();
    assert!(timing.contains("frames_per_second"));

    // same inputs, same bytes
    let again = root.join("again");
    run(&["track", "--config", s(&cfg), "--out", s(&again), "--model", s(&model), "--data", s(&seq)]).unwrap();
    assert_eq!(
        std::fs::read(tracked.join("sim-000.txt")).unwrap(),
        std::fs::read(again.join("sim-000.txt")).unwrap()
    );

    let evald = root.join("eval");
    let table = run(&["eval", "--out", s(&evald), "--data", s(&seq), s(&seq1), "--results", s(&tracked)]).unwrap();
    assert!(table.contains("OVERALL"));
    let csv = std::fs::read_to_string(evald.join("eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("name,MOTA,IDF1,IDS,MT,ML,Frag"));
}

#[test]
fn training_is_reproducible_from_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["train", "--config", s(&cfg), "--seed", "2", "--out", s(&a), "--scenes", "1"]).unwrap();
    run(&["train", "--config", s(&cfg), "--seed", "2", "--out", s(&b), "--scenes", "1"]).unwrap();
    assert_eq!(std::fs::read(a.join("model.ckpt")).unwrap(), std::fs::read(b.join("model.ckpt")).unwrap());
    assert_eq!(
        std::fs::read(a.join("train_log.csv")).unwrap(),
        std::fs::read(b.join("train_log.csv")).unwrap()
    );
}

#[test]
fn gradcheck_prints_per_layer_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = run(&["gradcheck", "--out", s(dir.path()), "--trials", "2", "--coords", "2"]).unwrap();
    assert!(text.contains("head.out.w"), "{text}");
    assert!(text.contains("max relative error"));
}

#[test]
fn bench_ablation_reports_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let text = run(&["bench-ablation", "--config", s(&cfg), "--out", s(dir.path()), "--train-scenes", "1"]).unwrap();
    assert!(text.contains("pooled") && text.contains("pooling zeroed"), "{text}");
    let header = text.lines().next().unwrap();
    assert!(header.find("IDF1").unwrap() < header.find("IDS").unwrap());
    let csv = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let err = run(&["simulate", "--config", s(&missing), "--out", s(dir.path())]).unwrap_err();
    assert!(err.to_string().contains("nope.json"), "{err}");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": {"hidden": 100}}"#).unwrap();
    let err = run(&["simulate", "--config", s(&bad), "--out", s(dir.path())]).unwrap_err();
    assert!(err.to_string().contains("model.hidden"));
    let err = run(&["track", "--out", s(dir.path()), "--model", s(&missing), "--data", s(dir.path())]).unwrap_err();
    assert!(matches!(err, trackpool::Error::Io { .. }));
    assert!(Cli::try_parse_from(["trackpool", "track"]).is_err());
    assert!(Cli::try_parse_from(["trackpool", "--profile", "huge", "simulate"]).is_err());
}

#[test]
fn binary_exits_nonzero_on_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_trackpool"))
        .args(["eval", "--out", s(dir.path()), "--data", "/nonexistent", "--results", "/nonexistent"])
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).starts_with("error:"));
}
