//! The `pearl` binary: run, report and batch.

use std::path::Path;
use std::process::Command;

const CONFIG: &str = "num_tasks = 2\nclasses_per_task = 2\nsamples_per_class = 60\nfeature_dim = 4\n\
hidden = [8, 6]\ne1_epochs = 2\ne2_epochs = 2\nreference_epochs = 3\n";

fn pearl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pearl")).args(args).output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, CONFIG);
    let out = dir.path().join("rec.json");
    let run = pearl(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "static_rank:2",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let record = pearl::harness::RunRecord::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(record.seed, 4);
    assert_eq!(record.config.method, pearl::harness::Method::StaticRank(2));

    let table = pearl(&["report", "--in", out.to_str().unwrap(), "--format", "text_table"]);
    assert!(String::from_utf8(table.stdout).unwrap().contains("FFM"));
    let csv = pearl(&["report", "--in", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 1 + 2 + 1);
    let bad = pearl(&["report", "--in", out.to_str().unwrap(), "--format", "xml"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("xml"));
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    write(&cfg, "method = \"nope\"\n");
    let run = pearl(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("nope"));
}

#[test]
fn batch_runs_every_config() {
    let dir = tempfile::tempdir().unwrap();
    for (name, method) in [("a", "pearl_dynamic"), ("b", "sequential_ft"), ("c", "complete_isolation")] {
        write(&dir.path().join(format!("{name}.toml")), &format!("{CONFIG}method = \"{method}\"\n"));
    }
    let batch = pearl(&["batch", "--configs", dir.path().to_str().unwrap(), "--jobs", "2"]);
    assert!(batch.status.success(), "{}", String::from_utf8_lossy(&batch.stderr));
    for name in ["a", "b", "c"] {
        let text = std::fs::read_to_string(dir.path().join(format!("{name}.json"))).unwrap();
        pearl::harness::RunRecord::from_json(&text).unwrap();
    }
}
