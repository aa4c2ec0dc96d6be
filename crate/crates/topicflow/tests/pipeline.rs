//! End-to-end checks of the command-line binary: real files in, real files
//! out, byte-level determinism across repeat runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicflow"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_world(dir: &Path, seed: u64) {
    run_ok(bin()
        .args(["synth", "--n-users", "120", "--rng-seed"])
        .arg(seed.to_string())
        .arg("--out-dir")
        .arg(dir));
}

fn world_files(dir: &Path) -> [std::path::PathBuf; 3] {
    [
        dir.join("edges.csv"),
        dir.join("users.csv"),
        dir.join("actions.jsonl"),
    ]
}

#[test]
fn synth_output_is_seed_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for d in [&a, &b] {
        fs::create_dir(d).unwrap();
        synth_world(d, 9);
    }
    fs::create_dir(&c).unwrap();
    synth_world(&c, 10);

    for name in ["edges.csv", "users.csv", "actions.jsonl", "meta.json"] {
        let left = fs::read(a.join(name)).unwrap();
        assert_eq!(left, fs::read(b.join(name)).unwrap(), "{name} differs across runs");
        assert!(!left.is_empty(), "{name} is empty");
    }
    assert_ne!(
        fs::read(a.join("actions.jsonl")).unwrap(),
        fs::read(c.join("actions.jsonl")).unwrap(),
        "a different seed must change the trace"
    );

    let meta: Value =
        serde_json::from_str(&fs::read_to_string(a.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["topic"], "synthetic");
    assert_eq!(meta["users"], 120);
}

#[test]
fn ingest_check_reports_the_loaded_world() {
    let tmp = tempfile::tempdir().unwrap();
    synth_world(tmp.path(), 9);
    let [edges, users, actions] = world_files(tmp.path());
    let out = run_ok(bin()
        .arg("ingest-check")
        .arg("--edges").arg(&edges)
        .arg("--users").arg(&users)
        .arg("--actions").arg(&actions));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("users"), "missing user count: {text}");
    assert!(text.contains("synthetic"), "missing topic listing: {text}");
}

#[test]
fn metrics_reproduces_the_chain_vector() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("edges.csv"), "A,B\nB,C\nC,D\n").unwrap();
    fs::write(tmp.path().join("users.csv"), "id\nA\nB\nC\nD\n").unwrap();
    let day = 86_400i64;
    let actions: String = [("A", 0), ("B", day), ("B", 2 * day), ("C", 2 * day), ("D", 3 * day)]
        .iter()
        .map(|(u, t)| format!("{{\"user\":\"{u}\",\"timestamp\":{t},\"topics\":[\"t\"]}}\n"))
        .collect();
    fs::write(tmp.path().join("actions.jsonl"), actions).unwrap();

    let report = tmp.path().join("metrics.json");
    run_ok(bin()
        .arg("metrics")
        .arg("--edges").arg(tmp.path().join("edges.csv"))
        .arg("--users").arg(tmp.path().join("users.csv"))
        .arg("--actions").arg(tmp.path().join("actions.jsonl"))
        .args(["--topic", "t", "--horizon", "4", "--origin", "0"])
        .arg("--out").arg(&report));
    let got: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let want = [
        ("volume", 1.0),
        ("participation", 0.75),
        ("dissemination", 0.5),
        ("reach", 0.5),
        ("spread", 0.25),
        ("cascade_instances", 0.0),
        ("collection_size", 2.0),
        ("rate", 0.625),
    ];
    for (key, value) in want {
        let field = got[key].as_f64().unwrap_or_else(|| panic!("missing {key}: {got}"));
        assert!((field - value).abs() <= 1e-12, "{key} = {field}, want {value}");
    }

    let out = run_ok(bin()
        .arg("build")
        .arg("--edges").arg(tmp.path().join("edges.csv"))
        .arg("--users").arg(tmp.path().join("users.csv"))
        .arg("--actions").arg(tmp.path().join("actions.jsonl"))
        .args(["--topic", "t", "--horizon", "4", "--origin", "0"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("A") && text.contains("D"), "chain users missing: {text}");
}

#[test]
fn evaluate_reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    synth_world(tmp.path(), 9);
    let [edges, users, actions] = world_files(tmp.path());
    let run = |path: &Path| {
        let out = run_ok(bin()
            .arg("evaluate")
            .arg("--edges").arg(&edges)
            .arg("--users").arg(&users)
            .arg("--actions").arg(&actions)
            .args([
                "--topic", "synthetic", "--base-window", "3", "--steps", "1",
                "--origin", "0", "--rng-seed", "4", "--summary",
            ])
            .arg("--out").arg(path));
        String::from_utf8(out.stderr).unwrap()
    };
    let first_summary = run(&tmp.path().join("r1.jsonl"));
    let second_summary = run(&tmp.path().join("r2.jsonl"));

    let first = fs::read(tmp.path().join("r1.jsonl")).unwrap();
    assert_eq!(first, fs::read(tmp.path().join("r2.jsonl")).unwrap());
    assert_eq!(first_summary, second_summary);
    assert!(first_summary.contains("baseline"), "summary table missing: {first_summary}");

    let text = String::from_utf8(first).unwrap();
    let mut graphs = std::collections::BTreeSet::new();
    for line in text.lines() {
        let row: Value = serde_json::from_str(line).expect("report line parses");
        assert_eq!(row["topic"], "synthetic");
        assert!(row["saturation"].as_f64().is_some());
        graphs.insert(row["graph"].as_str().unwrap().to_string());
    }
    assert!(graphs.contains("baseline") && graphs.contains("location"), "graphs: {graphs:?}");
}

#[test]
fn summarize_collapses_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    synth_world(tmp.path(), 9);
    let [edges, users, actions] = world_files(tmp.path());
    let report = tmp.path().join("report.jsonl");
    run_ok(bin()
        .arg("evaluate")
        .arg("--edges").arg(&edges)
        .arg("--users").arg(&users)
        .arg("--actions").arg(&actions)
        .args(["--topic", "synthetic", "--base-window", "3", "--steps", "1", "--origin", "0"])
        .arg("--out").arg(&report));
    let out = run_ok(bin().arg("summarize").arg("--report").arg(&report));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("graph") && table.contains("dbn"), "table malformed:\n{table}");
}

#[test]
fn predict_roundtrips_saved_models() {
    let tmp = tempfile::tempdir().unwrap();
    synth_world(tmp.path(), 9);
    let [edges, users, actions] = world_files(tmp.path());
    let models = tmp.path().join("models.json");
    let (s1, s2) = (tmp.path().join("s1.json"), tmp.path().join("s2.json"));
    let base = |out: &Path| {
        let mut c = bin();
        c.arg("predict")
            .arg("--edges").arg(&edges)
            .arg("--users").arg(&users)
            .arg("--actions").arg(&actions)
            .args(["--topic", "synthetic", "--horizon", "4", "--method", "dbn", "--origin", "0"])
            .arg("--out").arg(out);
        c
    };
    run_ok(base(&s1).arg("--models-out").arg(&models));
    run_ok(base(&s2).arg("--models-in").arg(&models));

    let first = fs::read(&s1).unwrap();
    assert_eq!(first, fs::read(&s2).unwrap(), "reusing saved models changed the scores");
    let scores: Value = serde_json::from_slice(&first).unwrap();
    let map = scores.as_object().expect("scores are a user→probability map");
    assert!(!map.is_empty());
    for (user, p) in map {
        let p = p.as_f64().unwrap_or_else(|| panic!("score for {user} not a number"));
        assert!((0.0..=1.0).contains(&p), "score for {user} out of range: {p}");
    }
}

#[test]
fn failures_print_a_category_and_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    synth_world(tmp.path(), 9);
    let [_, users, actions] = world_files(tmp.path());

    // Missing input file.
    let out = bin()
        .arg("evaluate")
        .arg("--edges").arg(tmp.path().join("nope.csv"))
        .arg("--users").arg(&users)
        .arg("--actions").arg(&actions)
        .args(["--topic", "synthetic"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("error["), "stderr missing category: {stderr}");

    // Invalid generator setting.
    let out = bin()
        .args(["synth", "--hom-prob", "1.5", "--out-dir"])
        .arg(tmp.path().join("bad"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("error[config]"), "stderr: {stderr}");

    // Unreadable report.
    fs::write(tmp.path().join("garbage.jsonl"), "not json\n").unwrap();
    let out = bin()
        .arg("summarize")
        .arg("--report")
        .arg(tmp.path().join("garbage.jsonl"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("error["), "stderr: {stderr}");
}
