use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rbama(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbama")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = rbama(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    rbama(dir, args).status.code().expect("exit code")
}

fn json(dir: &Path, args: &[&str]) -> Value {
    serde_json::from_str(&ok(dir, args)).unwrap()
}

/// A trained and taught agent in `<tmp>/agent`.
fn taught_agent(tmp: &TempDir) {
    ok(tmp.path(), &["--seed", "3", "--out", "agent", "train", "--net", "agent"]);
    ok(tmp.path(), &["--seed", "3", "teach", "--agent", "agent"]);
}

#[test]
fn teach_learns_the_dilemma_order() {
    let tmp = TempDir::new().unwrap();
    taught_agent(&tmp);
    let theory: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("agent/theory.json")).unwrap()).unwrap();
    let rules = theory["rules"].as_array().unwrap();
    assert_eq!(rules.len(), 2);
    let text = theory.to_string();
    assert!(text.contains("phi_R") && text.contains("phi_C"), "{text}");
}

#[test]
fn eval_identities_and_reproducibility() {
    let tmp = TempDir::new().unwrap();
    taught_agent(&tmp);
    let args = ["--format", "json", "--seed", "9", "eval", "--agent", "agent", "--episodes", "300"];
    let a = json(tmp.path(), &args);
    let b = json(tmp.path(), &args);
    assert_eq!(a, b);
    assert_eq!(a["r_instr"].as_f64().unwrap(), 300.0);
    assert_eq!(a["r_push"].as_f64().unwrap(), -a["count_conflict"].as_f64().unwrap());
    assert_eq!(a["r_resc"].as_f64().unwrap(), a["count_resc"].as_f64().unwrap());
}

#[test]
fn eval_with_zero_episodes_is_empty() {
    let tmp = TempDir::new().unwrap();
    taught_agent(&tmp);
    let r = json(tmp.path(), &["--format", "json", "eval", "--agent", "agent", "--episodes", "0"]);
    for k in ["r_instr", "r_resc", "r_push"] {
        assert_eq!(r[k].as_f64().unwrap(), 0.0);
    }
    assert_eq!(r["count_conflict"], 0);
}

#[test]
fn traces_cover_every_step() {
    let tmp = TempDir::new().unwrap();
    taught_agent(&tmp);
    let r = json(tmp.path(), &["--format", "json", "eval", "--agent", "agent", "--episodes", "20", "--traces", "t.jsonl"]);
    let lines = fs::read_to_string(tmp.path().join("t.jsonl")).unwrap();
    assert_eq!(lines.lines().count() as u64, r["total_steps"].as_u64().unwrap());
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert!(first["trace"]["action"].is_string());
}

#[test]
fn transcript_replay_reproduces_the_theory() {
    let tmp = TempDir::new().unwrap();
    taught_agent(&tmp);
    ok(tmp.path(), &["--out", "replayed.json", "replay-feedback", "--transcript", "agent/transcript.jsonl"]);
    let read = |p: &str| -> Value { serde_json::from_str(&fs::read_to_string(tmp.path().join(p)).unwrap()).unwrap() };
    assert_eq!(read("replayed.json"), read("agent/theory.json"));
}

#[test]
fn zero_teaching_episodes_leave_the_theory_alone() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--out", "agent", "train", "--net", "agent", "--episodes", "50"]);
    let before = fs::read_to_string(tmp.path().join("agent/theory.json")).unwrap();
    ok(tmp.path(), &["teach", "--agent", "agent", "--episodes", "0"]);
    assert_eq!(fs::read_to_string(tmp.path().join("agent/theory.json")).unwrap(), before);
}

#[test]
fn training_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    for out in ["a", "b"] {
        ok(tmp.path(), &["--seed", "4", "--out", out, "train", "--net", "instrumental", "--episodes", "300"]);
    }
    for f in ["instrumental.model", "instrumental_curve.csv"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_episode_training_still_writes_a_model() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--out", "m", "train", "--net", "rescue", "--episodes", "0"]);
    assert!(tmp.path().join("m/rescue.model").exists());
    assert_eq!(fs::read_to_string(tmp.path().join("m/rescue_curve.csv")).unwrap().lines().count(), 0);
}

#[test]
fn risk_csv_rows_exceed_the_threshold() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--out", "g", "train", "--net", "bridge-guard", "--episodes", "20000"]);
    ok(tmp.path(), &["--out", "risk.csv", "risk-csv", "--model", "g/bridge-guard.model", "--resets", "300"]);
    let mut r = csv::Reader::from_path(tmp.path().join("risk.csv")).unwrap();
    let header = r.headers().unwrap().clone();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        let col = header.iter().position(|h| h == format!("risk_{}", &rec[0])).unwrap();
        assert!(rec[col].parse::<f64>().unwrap() > 0.8);
        assert!(rec[1].starts_with('['));
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn embed_reports_weights_and_errors() {
    let tmp = TempDir::new().unwrap();
    let r = json(tmp.path(), &["--format", "json", "embed", "--scope", "from-s0"]);
    assert!((r["weight"].as_f64().unwrap() - 0.53).abs() < 0.3);

    let mut cfg: Value = serde_json::from_str(rbama::env::fixtures::source("moral_dilemma").unwrap()).unwrap();
    cfg["moving_person_ids"] = Value::Array(vec![]);
    cfg["static_persons"] = Value::Array(vec![]);
    fs::write(tmp.path().join("empty.json"), cfg.to_string()).unwrap();
    let r = json(tmp.path(), &["--format", "json", "--config", "empty.json", "embed"]);
    assert_eq!(r["weight"].as_f64().unwrap(), 0.0);

    assert_eq!(code(tmp.path(), &["--config", "stochastic_moral_dilemma", "embed"]), 2);
    assert_eq!(code(tmp.path(), &["--config", "enlarged_state_space", "embed", "--timeout-secs", "0"]), 3);
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(tmp.path(), &["--config", "no_such_world", "render"]), 2);
    fs::write(tmp.path().join("bad.json"), r#"{"grid_width": 1}"#).unwrap();
    assert_eq!(code(tmp.path(), &["--config", "bad.json", "render"]), 2);
    ok(tmp.path(), &["--out", "agent", "train", "--net", "agent", "--episodes", "20"]);
    assert_eq!(code(tmp.path(), &["--config", "right_bridge_blocked", "eval", "--agent", "agent"]), 2);
}

#[test]
fn contradictory_feedback_exits_with_4() {
    let tmp = TempDir::new().unwrap();
    let entries = [
        r#"{"state_hash":"0","labels":["D"],"action":"down","chosen":[],"feedback":{"obligation":"phi_R","reason":"D","kind":"goal"}}"#,
        r#"{"state_hash":"1","labels":["B"],"action":"down","chosen":["d_D"],"feedback":{"obligation":"phi_C","reason":"B","kind":"constraint"}}"#,
        r#"{"state_hash":"2","labels":["D"],"action":"down","chosen":["d_B"],"feedback":{"obligation":"phi_R","reason":"D","kind":"goal"}}"#,
    ];
    fs::write(tmp.path().join("t.jsonl"), entries.join("\n")).unwrap();
    assert_eq!(code(tmp.path(), &["replay-feedback", "--transcript", "t.jsonl"]), 4);
}

#[test]
fn render_and_graph() {
    let tmp = TempDir::new().unwrap();
    let frame = ok(tmp.path(), &["render"]);
    assert!(frame.starts_with("labels:"), "{frame}");
    ok(tmp.path(), &["--out", "f.png", "render", "--png"]);
    assert!(fs::read(tmp.path().join("f.png")).unwrap().starts_with(b"\x89PNG"));

    ok(tmp.path(), &["--out", "agent", "train", "--net", "agent", "--episodes", "20"]);
    let dot = ok(tmp.path(), &["graph", "--agent", "agent"]);
    assert!(dot.starts_with("digraph") && !dot.contains("->"), "{dot}");
}
