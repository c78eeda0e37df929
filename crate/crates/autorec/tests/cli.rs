mod common;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use autorec::artifact::{self, ALL_FILES};
use autorec_core::journal::JournalRecord;
use common::call;
use serde_json::Value;

fn autorec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autorec"))
        .current_dir(dir)
        .args(args)
        .env_remove("AUTOREC_SEED")
        .env_remove("AUTOREC_STATE")
        .env_remove("AUTOREC_SERVER")
        .env_remove("AUTOREC_ENV")
        .env_remove("AUTOREC_JSON")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = autorec(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(dir: &Path, args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.push("--json");
    serde_json::from_str(&ok(dir, &a)).unwrap()
}

const INNER: [&str; 11] = [
    "inner", "run", "--persona", "optimizer", "--provider", "heuristic", "--rounds", "7", "--per-round", "10", "--seed",
];

#[test]
fn identical_inner_runs_write_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |out: &str, seed: &str| {
        let mut args = INNER.to_vec();
        args.extend([seed, "--out", out]);
        ok(tmp.path(), &args)
    };
    let (a, b) = (run("a", "1"), run("b", "1"));
    assert_eq!(a.replace("artifact: a", ""), b.replace("artifact: b", ""));
    assert!(a.lines().any(|l| l.trim_start().starts_with("1. ")), "ranked list on stdout:\n{a}");
    for f in ALL_FILES {
        let (x, y) = (fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap());
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, y, "{f}");
    }
    run("c", "2");
    assert_ne!(
        fs::read(tmp.path().join("a/ranking.jsonl")).unwrap(),
        fs::read(tmp.path().join("c/ranking.jsonl")).unwrap()
    );
}

#[test]
fn artifact_accounts_for_every_proposal() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = INNER.to_vec();
    args.extend(["3", "--out", "run"]);
    let v = json(tmp.path(), &args);
    let dir = tmp.path().join("run");
    let proposals: Vec<Value> = fs::read_to_string(dir.join(artifact::PROPOSALS_FILE))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(proposals.len(), 70);
    assert!(proposals.iter().all(|p| p["disposition"]["disposition"].is_string()));
    let ranking = artifact::read_ranking(&dir).unwrap();
    assert_eq!(ranking.len(), v["ranking"].as_array().unwrap().len());
    assert_eq!(fs::read_to_string(dir.join(artifact::PROMPTS_FILE)).unwrap().lines().count(), 7);
    let run: Value = serde_json::from_str(&fs::read_to_string(dir.join(artifact::RUN_FILE)).unwrap()).unwrap();
    assert_eq!(run["run"]["seed"], 3);
}

#[test]
fn scripted_replay_reproduces_a_heuristic_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = INNER.to_vec();
    args.extend(["4", "--out", "orig"]);
    ok(tmp.path(), &args);
    ok(
        tmp.path(),
        &[
            "inner", "run", "--persona", "optimizer", "--provider", "scripted", "--replay", "orig/replay.jsonl",
            "--rounds", "7", "--per-round", "10", "--seed", "4", "--out", "again",
        ],
    );
    let strip = |dir: &str| -> Vec<Value> {
        artifact::read_ranking(&tmp.path().join(dir))
            .unwrap()
            .into_iter()
            .map(|e| {
                let mut v = serde_json::to_value(&e).unwrap();
                v["proposal"]["provenance"] = Value::Null;
                v
            })
            .collect()
    };
    assert_eq!(strip("orig"), strip("again"));
    for f in [artifact::PROMPTS_FILE, artifact::RAW_FILE] {
        assert_eq!(
            fs::read(tmp.path().join("orig").join(f)).unwrap(),
            fs::read(tmp.path().join("again").join(f)).unwrap(),
            "{f}"
        );
    }
    let out = autorec(
        tmp.path(),
        &["inner", "run", "--persona", "optimizer", "--provider", "scripted", "--seed", "4"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--replay"));
}

#[test]
fn seed_has_an_environment_override() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        tmp.path(),
        &["inner", "run", "--persona", "optimizer", "--per-round", "10", "--rounds", "2", "--seed", "5", "--out", "flag"],
    );
    let out = Command::new(env!("CARGO_BIN_EXE_autorec"))
        .current_dir(tmp.path())
        .args(["inner", "run", "--persona", "optimizer", "--per-round", "10", "--rounds", "2", "--out", "env"])
        .env("AUTOREC_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(tmp.path().join("flag/ranking.jsonl")).unwrap(),
        fs::read(tmp.path().join("env/ranking.jsonl")).unwrap()
    );
}

#[test]
fn loop_through_state_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    ok(p, &["env", "gen", "--dir", "envd", "--seed", "2", "--log-rows", "4000"]);
    assert_eq!(json(p, &["journal", "show", "--state", "st"]), Value::Array(vec![]));
    ok(p, &["steering", "add", "--persona", "reward", "--text", "favor dwell time", "--state", "st"]);
    let v = json(
        p,
        &[
            "inner", "run", "--persona", "reward", "--env", "envd", "--rounds", "3", "--seed", "2", "--state", "st",
            "--submit", "1", "--out", "r",
        ],
    );
    assert_eq!(v["submitted"], serde_json::json!([1]));
    let prompts = fs::read_to_string(p.join("r").join(artifact::PROMPTS_FILE)).unwrap();
    assert!(prompts.contains("favor dwell time"));
    let trials = json(p, &["trials", "list", "--state", "st"]);
    assert_eq!(trials[0]["phase"], "PROPOSED");
    ok(p, &["outer", "run", "--state", "st", "--env", "envd"]);
    let journal = json(p, &["journal", "show", "--state", "st"]);
    let records: Vec<JournalRecord> = serde_json::from_value(journal).unwrap();
    assert_eq!(records.len(), 1);
    assert!(ok(p, &["journal", "show", "--state", "st"]).contains("#1 completed"));

    let out = autorec(p, &["trials", "show", "7", "--state", "st"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_found"));
    let out = autorec(p, &["inner", "run", "--persona", "critic"]);
    assert!(!out.status.success());
}

#[test]
fn oracle_cache_refuses_stale_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let args = ["oracle", "grid", "--grid", "architecture", "--seed", "1", "--cache", "cache"];
    let first = json(p, &args);
    assert_eq!(first["cached"], false);
    let second = json(p, &args);
    assert_eq!(second["cached"], true);
    assert_eq!(first["result"], second["result"]);

    let path = p.join(first["cache"].as_str().unwrap());
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["key"] = "0".repeat(64).into();
    fs::write(&path, v.to_string()).unwrap();
    let out = autorec(p, &args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stale"));
    let mut refresh = args.to_vec();
    refresh.push("--refresh");
    assert_eq!(json(p, &refresh)["result"], first["result"]);
    assert_eq!(json(p, &args)["cached"], true);
}

#[test]
fn ablation_writes_report_files() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let report = json(p, &["ablation", "run", "--runs", "2", "--ideas", "10", "--out", "abl"]);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let csv = fs::read_to_string(p.join("abl/ablation_report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("variant,run,best_loss,z"));
    assert_eq!(csv.lines().count(), 1 + 6 * 2);
    let summary = fs::read_to_string(p.join("abl/ablation_summary.txt")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("pooling:"));
}

#[test]
fn serve_accepts_trials_and_survives_a_kill() {
    let tmp = tempfile::tempdir().unwrap();
    let start = || {
        let mut child = Command::new(env!("CARGO_BIN_EXE_autorec"))
            .current_dir(tmp.path())
            .args(["outer", "serve", "--state", "st", "--port", "0", "--tick-interval-ms", "60000", "--log-rows", "2000"])
            .env("AUTOREC_TEST_TOKEN", "tok")
            .args(["--auth-token-env", "AUTOREC_TEST_TOKEN"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let url = line.trim().strip_prefix("listening on ").unwrap().to_string();
        (child, url)
    };
    let (mut child, url) = start();
    let manifest = r#"{"diff": [], "source": "human", "persona": "reward"}"#;
    let (status, body) = call("POST", &format!("{url}/trials"), Some("tok"), Some(manifest));
    assert_eq!((status, body["phase"].as_str()), (201, Some("PROPOSED")));
    let (_, trial) = call("GET", &format!("{url}/trials/1"), Some("tok"), None);
    assert_eq!(trial["phase"], "PROPOSED");
    assert_eq!(call("GET", &format!("{url}/trials/1"), None, None).0, 401);
    child.kill().unwrap();
    child.wait().unwrap();

    let (mut child, url) = start();
    let (_, trial) = call("GET", &format!("{url}/trials/1"), Some("tok"), None);
    assert_eq!(trial["phase"], "PROPOSED");
    child.kill().unwrap();
    child.wait().unwrap();
}
