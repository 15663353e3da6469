//! The binary's exit codes and its single stdout record.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_proofloop");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/burnside")
}

struct Out {
    code: i32,
    json: Value,
}

fn proofloop(args: &[&str], cwd: &Path) -> Out {
    let out = Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("PROOFLOOP_API_KEY")
        .env_remove("PROOFLOOP_TOOLCHAIN_ROOT")
        .env_remove("PROOFLOOP_WALL_CLOCK")
        .env("HOME", cwd)
        .env("PATH", "/usr/bin:/bin")
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "expected one stdout record, got {stdout:?}");
    Out {
        code: out.status.code().unwrap(),
        json: serde_json::from_str(lines[0]).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs the Burnside replay into `dir/out` and returns its result.
fn burnside(dir: &Path, extra: &[&str]) -> Out {
    let fx = fixtures();
    let input = fx.join("burnside.lean");
    let fixture = fx.join("burnside.fx.toml");
    let rules = fx.join("rules.toml");
    let mut args = vec!["run", s(&input), "--fixture", s(&fixture), "--rules", s(&rules), "--out", "out"];
    args.extend_from_slice(extra);
    proofloop(&args, dir)
}

#[test]
fn solved_run_then_replay_trace_and_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let run = burnside(tmp.path(), &[]);
    assert_eq!(run.code, 0, "{}", run.json);
    assert_eq!(run.json["verdict"], "solved");
    assert_eq!(run.json["plan_size"], 32);

    let replay = proofloop(&["replay", "out/ledger.jsonl"], tmp.path());
    assert_eq!(replay.code, 0);
    assert_eq!(replay.json["status"], "frames consistent");

    let trace = proofloop(&["trace", "out/ledger.jsonl", "--format", "dot"], tmp.path());
    assert_eq!(trace.code, 0);
    let dot = std::fs::read_to_string(tmp.path().join("out/ledger.trace.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    let bad = proofloop(&["trace", "out/ledger.jsonl", "--format", "svg"], tmp.path());
    assert_eq!((bad.code, bad.json["status"].as_str()), (2, Some("error")));

    let rules = fixtures().join("rules.toml");
    let audit = proofloop(&["audit", "out/workspace", "--rules", s(&rules)], tmp.path());
    assert_eq!(audit.code, 0, "{}", audit.json);
    assert_eq!(audit.json["pass"], true);

    // A narrower permitted set fails the same workspace.
    let narrow = proofloop(&["audit", "out/workspace", "--rules", s(&rules), "--permit", "propext"], tmp.path());
    assert_eq!(narrow.code, 1);
    assert_eq!(narrow.json["signature_match"], true);

    // So does an `admit` anywhere in the workspace.
    let helper = tmp.path().join("out/workspace/Proofloop/Def_TauOrbitEquiv.lean");
    let mut src = std::fs::read_to_string(&helper).unwrap();
    src.push_str("\ntheorem extra : True := by admit\n");
    std::fs::write(&helper, src).unwrap();
    let admit = proofloop(&["audit", "out/workspace", "--rules", s(&rules)], tmp.path());
    assert_eq!(admit.code, 1);
    assert_eq!(admit.json["forbidden"][0]["token"], "admit");
}

#[test]
fn unfinished_runs_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = burnside(tmp.path(), &["--wall-clock", "0s"]);
    assert_eq!(out.code, 1);
    assert_eq!(out.json["reason"], "time_budget");

    let stop = tmp.path().join("STOP");
    std::fs::write(&stop, "").unwrap();
    let out = burnside(tmp.path(), &["--stop-file", s(&stop)]);
    assert_eq!(out.code, 1);
    assert_eq!(out.json["reason"], "cancelled");
}

#[test]
fn input_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "missing.lean"],
        vec!["run", "x.lean", "--no-such-flag"],
        vec!["run", "x.lean", "--wall-clock", "soon"],
        vec!["replay", "missing.jsonl"],
        vec!["stats", "nothing-*.jsonl"],
        vec!["audit", "not-a-workspace"],
    ];
    for args in cases {
        let out = proofloop(&args, tmp.path());
        assert_eq!(out.code, 2, "{args:?}: {}", out.json);
        assert_eq!(out.json["status"], "error");
        assert_eq!(out.json["exit_code"], 2);
    }
    let input = fixtures().join("burnside.lean");
    let out = burnside(tmp.path(), &["--replan-limit", "0"]);
    assert_eq!(out.code, 2);
    let out = proofloop(&["run", s(&input)], tmp.path());
    assert_eq!(out.code, 2, "scripted backend needs a fixture");

    std::fs::write(tmp.path().join("bad.jsonl"), "{\"record\":\"nonsense\"}\n").unwrap();
    assert_eq!(proofloop(&["replay", "bad.jsonl"], tmp.path()).code, 2);
}

#[test]
fn environment_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = burnside(tmp.path(), &["--verifier", "real", "--toolchain-root", s(tmp.path())]);
    assert_eq!(out.code, 3, "{}", out.json);
    assert!(out.json["error"].as_str().unwrap().contains("toolchain"));

    let input = fixtures().join("burnside.lean");
    let out = proofloop(&["run", s(&input), "--backend", "live"], tmp.path());
    assert_eq!(out.code, 3);
    assert!(out.json["error"].as_str().unwrap().contains("PROOFLOOP_API_KEY"));
}

#[test]
fn replay_detects_a_tampered_frame() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(burnside(tmp.path(), &[]).code, 0);
    let path = tmp.path().join("out/ledger.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let i = lines.iter().rposition(|l| l.contains("\"record\":\"frame\"")).unwrap();
    let mut frame: Value = serde_json::from_str(&lines[i]).unwrap();
    frame["edges"] = Value::Array(vec![]);
    lines[i] = frame.to_string();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = proofloop(&["replay", "out/ledger.jsonl"], tmp.path());
    assert_eq!(out.code, 1, "{}", out.json);
    assert_eq!(out.json["status"], "inconsistent");
}

fn outcome_line(hours: f64, statements: usize, solved: bool) -> String {
    let outcome = if solved {
        serde_json::json!({"verdict": "solved", "final_plan_revision": 1})
    } else {
        serde_json::json!({"verdict": "unfinished", "reason": "time_budget", "final_plan_revision": 1})
    };
    serde_json::json!({
        "record": "outcome",
        "outcome": outcome,
        "wall_clock_ms": (hours * 3_600_000.0).round() as u64,
        "usage_total": {"prompt_tokens": 0, "completion_tokens": 0, "cache_read_tokens": 0, "cache_write_tokens": 0},
        "statement_count": statements,
    })
    .to_string()
}

#[test]
fn stats_over_repeat_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let hours = [0.170, 0.185, 0.195, 0.205, 0.215, 0.225, 0.247, 0.290];
    for (i, h) in hours.iter().enumerate() {
        std::fs::write(tmp.path().join(format!("run{i}.jsonl")), outcome_line(*h, 2, true) + "\n").unwrap();
    }
    std::fs::write(tmp.path().join("run9.jsonl"), outcome_line(3.9, 7, false) + "\n").unwrap();
    let out = proofloop(&["stats", "run*.jsonl"], tmp.path());
    assert_eq!(out.code, 0, "{}", out.json);
    assert_eq!(out.json["runs"], 8);
    assert_eq!(out.json["row"], "0.22±0.04h | 0.21h | 0.17–0.29h | 2.0±0.0 | 6.5±1.1");
    assert_eq!(out.json["skipped_unsolved"], serde_json::json!(["run9.jsonl"]));

    let only_unsolved = proofloop(&["stats", "run9.jsonl"], tmp.path());
    assert_eq!(only_unsolved.code, 2);
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = Command::new(BIN).arg(flag).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        assert!(!out.stdout.is_empty());
    }
    // No way to pass the key on the command line.
    let help = Command::new(BIN).args(["run", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&help.stdout).to_lowercase();
    assert!(!text.contains("key") && !text.contains("token"));
}
