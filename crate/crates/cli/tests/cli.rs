use std::path::Path;
use std::process::{Command, Output};

fn eaqga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eaqga")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TOY: &str = r#"{"n":2,"q":0.5,"mu":[0.1,0.2],"sigma":[[0.04,0.01],[0.01,0.09]]}"#;

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = eaqga(&["synth", "--n", "20", "--seed", "7", "-o", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.json");
    eaqga(&["synth", "--n", "20", "--seed", "8", "-o", path(&c)]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn oracle_prints_toy_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("toy.json");
    std::fs::write(&p, TOY).unwrap();
    let o = eaqga(&["oracle", "--problem", path(&p)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["best_x"], "11");
    assert!((v["fitness"].as_f64().unwrap() - 0.225).abs() < 1e-12);
    assert_eq!(v["count"], 4);
}

#[test]
fn oracle_limit_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("toy.json");
    std::fs::write(&p, TOY).unwrap();
    assert_eq!(eaqga(&["oracle", "--problem", path(&p), "--limit", "1"]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let o = eaqga(&["solve", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert_eq!(eaqga(&["solve", "--algo", "sa", "--problem", "x.json"]).status.code(), Some(1));
    assert_eq!(eaqga(&["oracle", "--problem", "/nonexistent/p.json"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n":2,"q":0.5,"mu":[0.1,0.2],"sigma":[[0.04,0.02],[0.01,0.09]]}"#).unwrap();
    assert_eq!(eaqga(&["oracle", "--problem", path(&bad)]).status.code(), Some(2));
    assert_eq!(eaqga(&["version"]).status.code(), Some(0));
}

#[test]
fn ingest_builds_a_problem() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("prices.csv");
    std::fs::write(
        &csv,
        "date,AAA,BBB\n2024-01-02,100,50\n2024-01-03,101,49\n2024-01-04,102.5,49.5\n2024-01-05,101,50.5\n",
    )
    .unwrap();
    let out = dir.path().join("p.json");
    let o = eaqga(&["ingest", path(&csv), "--q", "0.5", "-o", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["n"], 2);
    assert_eq!(v["names"], serde_json::json!(["AAA", "BBB"]));

    std::fs::write(&csv, "date,AAA\n2024-01-02,100\n2024-01-03,-1\n").unwrap();
    assert_eq!(eaqga(&["ingest", path(&csv)]).status.code(), Some(2));
}

#[test]
fn solve_writes_a_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("toy.json");
    std::fs::write(&p, TOY).unwrap();
    for algo in ["eaqga", "ga", "AQGA"] {
        let out = dir.path().join(format!("{algo}.json"));
        let o = eaqga(&["solve", "--algo", algo, "--problem", path(&p), "--seed", "3", "-o", path(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["algorithm"], algo.to_uppercase());
        assert_eq!(v["problem_id"], "toy");
        assert_eq!(v["best_per_iteration"].as_array().unwrap().len(), 20);
        assert!(v["wall_time"].as_f64().is_some());
    }
}

#[test]
fn bench_writes_outputs_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.json"), TOY).unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
[problems]
files = ["toy.json"]

[[problems.synth]]
n = 8
seed = 1

[run]
populations = [4]
iterations = 5
repeats = 3
seed = 11

[output]
scale = 100.0
"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = eaqga(&["bench", "--config", path(&cfg), "-o", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("problem_id,optimum,algo,population,avg,std\n"));
    assert!(summary.contains("toy,22.5000,"));
    assert_eq!(summary.lines().count(), 7);
    assert_eq!(std::fs::read_to_string(a.join("runs.jsonl")).unwrap().lines().count(), 18);
    for f in ["runs.jsonl", "summary.csv", "metadata.json", "convergence/toy_pop4.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    std::fs::write(&cfg, "[run]\nrepeats = 1\n[problems]\nfiles = [\"missing.json\"]\n").unwrap();
    assert_eq!(eaqga(&["bench", "--config", path(&cfg), "-o", path(&a)]).status.code(), Some(2));
}
