use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commonground"))
        .args(args)
        .current_dir(dir)
        .env_remove("COMMONGROUND_DATA")
        .output()
        .expect("spawn commonground")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let last = text.lines().last().expect("stderr output");
    serde_json::from_str(last).expect("json error report")
}

#[test]
fn corrupted_markable_fails_validation_with_its_id() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "2", "synth", "--out", "corpus", "--dialogues", "5"]);
    assert_eq!(ok(d, &["validate", "--corpus", "corpus"])["valid"], true);

    let path = d.join("corpus/markables.json");
    let mut markables: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let id = markables[1]["id"].as_str().unwrap().to_string();
    markables[1]["end_token"] = Value::from(500);
    std::fs::write(&path, serde_json::to_string(&markables).unwrap()).unwrap();

    let out = run(d, &["validate", "--corpus", "corpus"]);
    assert!(!out.status.success());
    let report = stderr_json(&out);
    assert_eq!(report["id"], id.as_str());
    assert!(report["message"].as_str().unwrap().contains(&id));
}

#[test]
fn scripted_selfplay_writes_one_row_per_shared_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let summary = ok(d, &["--seed", "1", "selfplay", "--agent", "random", "--shared", "4,5,6", "--games", "40", "--out", "sp"]);
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, k) in rows.iter().zip([4, 5, 6]) {
        assert_eq!(row["num_shared"], k);
        assert_eq!(row["games"], 40);
    }
    let csv = std::fs::read_to_string(d.join("sp/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let transcripts = std::fs::read_to_string(d.join("sp/transcripts.jsonl")).unwrap();
    assert_eq!(transcripts.lines().count(), 120);

    // Same seed, same bytes.
    ok(d, &["--seed", "1", "selfplay", "--agent", "random", "--shared", "4,5,6", "--games", "40", "--out", "sp2"]);
    assert_eq!(transcripts, std::fs::read_to_string(d.join("sp2/transcripts.jsonl")).unwrap());
}

#[test]
fn training_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "3", "synth", "--out", "corpus", "--dialogues", "30"]);
    ok(d, &["--seed", "3", "split", "--corpus", "corpus", "--out", "split.json"]);
    let small = [
        "--set", "model.token_dim=8", "--set", "model.hidden_dim=8", "--set", "model.attr_dim=4", "--set", "model.rel_dim=4",
        "--set", "model.attention_dim=8", "--set", "model.epochs=2",
    ];
    let mut args: Vec<&str> = small.to_vec();
    args.extend(["train", "--corpus", "corpus", "--split", "split.json", "--out", "m.ckpt"]);
    let trained = ok(d, &args);
    assert_eq!(trained["epochs"], 2);
    assert!(d.join("m.ckpt.meta.json").exists());
    assert_eq!(std::fs::read_to_string(d.join("m.ckpt.metrics.jsonl")).unwrap().lines().count(), 2);

    let eval = ok(d, &["evaluate", "--corpus", "corpus", "--split", "split.json", "--model", "m.ckpt", "--out", "eval.json"]);
    assert_eq!(eval["variant"], "TSEL-REF-DIAL");
    ok(d, &["selfplay", "--model", "m.ckpt", "--shared", "4,5", "--games", "4", "--out", "sp"]);
    let report = ok(d, &["report", "--eval", "eval.json", "--selfplay", "sp/summary.json", "--out", "rep"]);
    assert_eq!(report["results"].as_array().unwrap().len(), 1);
    let table = std::fs::read_to_string(d.join("rep/results.csv")).unwrap();
    assert!(table.starts_with("Model,Target Selection,Reference Resolution (Exact Match),#Shared=4,#Shared=5"), "{table}");
    ok(d, &["render", "transcript", "--transcripts", "sp/transcripts.jsonl", "--scenarios", "sp/scenarios.json", "--game", "0", "--out", "t.svg"]);
    assert!(std::fs::read_to_string(d.join("t.svg")).unwrap().contains("<svg"));
}

#[test]
fn config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["--seed", "9", "--set", "model.lr=0.01", "config", "--out", "exp.conf"]);
    assert!(out.status.success());
    let a = run(d, &["--config", "exp.conf", "config"]);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text, std::fs::read_to_string(d.join("exp.conf")).unwrap());
    assert!(text.contains("seed = 9") && text.contains("model.lr = 0.01"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));
    let usage = run(d, &["frobnicate"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(stderr_json(&usage)["error"], "usage");
    let bad_key = run(d, &["--set", "model.nope=1", "config"]);
    assert_eq!(bad_key.status.code(), Some(2));
    assert_eq!(stderr_json(&bad_key)["error"], "usage");
    let missing = run(d, &["validate", "--corpus", "absent"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(stderr_json(&missing)["error"], "io");
}

#[test]
fn relative_inputs_resolve_against_the_data_root() {
    let data = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    ok(data.path(), &["synth", "--out", "corpus", "--dialogues", "3"]);
    let out = Command::new(env!("CARGO_BIN_EXE_commonground"))
        .args(["validate", "--corpus", "corpus"])
        .current_dir(work.path())
        .env("COMMONGROUND_DATA", data.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
