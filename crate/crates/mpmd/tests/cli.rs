//! End-to-end checks of the command-line surface and its exit codes.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpmd"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("mpmd-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn generate_simulate_offline_round_trip() {
    let file = tmp("ex1.jsonl");
    let out = bin()
        .args(["generate", "--instance", "ex1:n=3,theta=1,eps=0.05,delta=1,alpha=2"])
        .args(["--out", file.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&file).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);

    let out = bin()
        .args(["simulate", "--instance", file.to_str().unwrap()])
        .args(["--matcher", "algA", "--offline", "exact"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["total"].as_f64().unwrap() > 0.0);
    assert_eq!(v["offline_exact"], serde_json::json!(true));
    assert!(v["ratio"].as_f64().unwrap() >= 1.0 - 1e-9);

    let out = bin()
        .args(["offline", "--instance", file.to_str().unwrap(), "--offline", "exact"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["total"].as_f64().unwrap() > 0.0);
    assert_eq!(v["matches"].as_array().unwrap().len(), 4);

    std::fs::remove_file(&file).ok();
}

#[test]
fn simulate_writes_trace() {
    let trace = tmp("trace.jsonl");
    let out = bin()
        .args(["simulate", "--instance", "rand:k=3,count=6,horizon=5,seed=2"])
        .args(["--matcher", "greedy", "--trace", trace.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut arrivals = 0;
    let mut matched = 0;
    for line in text.lines() {
        let ev: serde_json::Value = serde_json::from_str(line).unwrap();
        match ev["event"].as_str().unwrap() {
            "arrival" => arrivals += 1,
            "matched" => matched += 1,
            _ => {}
        }
    }
    assert_eq!(arrivals, 6);
    assert_eq!(matched, 3);
    std::fs::remove_file(&trace).ok();
}

#[test]
fn adversary_subcommand_saves_materialized_instance() {
    let file = tmp("adv.jsonl");
    let out = bin()
        .args(["adversary", "--instance", "adv5:K=3,delta=1,n=4,m=2"])
        .args(["--matcher", "greedy", "--save-instance", file.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["ratio"].as_f64().unwrap() >= 1.0 - 1e-9);
    let saved = std::fs::read_to_string(&file).unwrap();
    let header: serde_json::Value = serde_json::from_str(saved.lines().next().unwrap()).unwrap();
    assert_eq!(header["meta"]["rounds"].as_array().unwrap().len(), 2);
    std::fs::remove_file(&file).ok();
}

#[test]
fn sweep_writes_stable_csv_and_sidecars() {
    let spec = tmp("sweep.json");
    let out_csv = tmp("sweep.csv");
    std::fs::write(
        &spec,
        serde_json::json!({
            "template": "adv5:K={K},delta=1,n={n},m=2",
            "matchers": ["greedy", "algA"],
            "offline": "both",
            "axes": {"K": [3, 4], "n": [4, 8]}
        })
        .to_string(),
    )
    .unwrap();
    for _ in 0..2 {
        let out = bin()
            .args(["sweep", "--spec", spec.to_str().unwrap()])
            .args(["--out", out_csv.to_str().unwrap(), "--seed", "7"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = std::fs::read_to_string(&out_csv).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("row,K,alpha,theta,tau,n,m,matcher"));
    let cells = csv.lines().filter(|l| l.starts_with("cell,")).count();
    assert_eq!(cells, 2 * 2 * 2);
    assert!(csv.lines().any(|l| l.starts_with("summary,")));
    assert!(out_csv.with_extension("jsonl").exists());
    assert!(out_csv.with_extension("meta.json").exists());
    for p in [&spec, &out_csv, &out_csv.with_extension("jsonl"), &out_csv.with_extension("meta.json")] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn verify_subcommand_passes() {
    let out = bin().arg("verify").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("passed"));
}

#[test]
fn input_errors_exit_with_code_two() {
    let out = bin()
        .args(["simulate", "--instance", "ex2:n=4,tau=10,theta=1,eps=0.1"])
        .args(["--matcher", "s2:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("admissible window"), "stderr: {err}");

    let out = bin()
        .args(["simulate", "--instance", "rand:k=2,count=4", "--matcher", "s9:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
