use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_imbalanced-ds"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn toy_csv(dir: &Path) -> std::path::PathBuf {
    // 20 rows, 3 binary features, 6 positives.
    let mut s = String::from("perm_sms,api_exec,url_ads,label\n");
    for i in 0..20 {
        let pos = i % 10 < 3;
        let f = |b: bool| if b { "1" } else { "0" };
        s.push_str(&format!(
            "{},{},{},{}\n",
            f(pos || i == 7),
            f(pos && i % 2 == 0),
            f(!pos && i % 3 == 0),
            f(pos)
        ));
    }
    let p = dir.join("toy.csv");
    fs::write(&p, s).unwrap();
    p
}

#[test]
fn summarize_prints_imbalance_ratio() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    let out = run(&["summarize", "toy.csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("imbalance ratio: 2.33"), "{text}");

    let out = run(&["summarize", "toy.csv", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["positives"], 6);
    assert_eq!(v["total"], 20);
}

#[test]
fn single_tree_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    let out = run(
        &[
            "experiment",
            "--data",
            "toy.csv",
            "--iterations",
            "1",
            "--models",
            "decision_tree",
            "--balance",
            "none",
            "--out",
            "res",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "model,balance,recall_mean,recall_std,f1_mean,f1_std,gmean_mean,gmean_std,mcc_mean,mcc_std,iterations"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("decision_tree,none,"));
    assert!(lines[1].ends_with(",1"));

    let md = fs::read_to_string(dir.path().join("res/results.md")).unwrap();
    assert!(md.contains("(-)"), "{md}");

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("res/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outcome"]["records"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["outcome"]["splits"][0]["test_rows"], 4);
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "ingest",
        "summarize",
        "experiment",
        "compare-balancing",
        "hardness",
        "report",
        "train",
        "evaluate",
    ] {
        let out = run(&[sub, "--help"], dir.path());
        assert!(
            out.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    fs::write(dir.path().join("bad.toml"), "iterations = 0\n").unwrap();
    let code = |args: &[&str]| run(args, dir.path()).status.code().unwrap();

    assert_eq!(code(&["experiment", "--config", "bad.toml"]), 1);
    assert_eq!(code(&["experiment", "--models", "svm"]), 1);
    assert_eq!(code(&["summarize", "missing.csv"]), 2);

    fs::write(dir.path().join("broken.csv"), "a,label\n1,1\nx,0\n").unwrap();
    let out = run(&["summarize", "broken.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3, column 1"));
}

#[test]
fn failed_arm_gives_partial_exit_and_all_failed_gives_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    // 16 training rows leave a 4-row DSEL, too small for k = 7.
    let args = |models: &'static str, out: &'static str| {
        vec![
            "experiment",
            "--data",
            "toy.csv",
            "--iterations",
            "1",
            "--pool-size",
            "3",
            "--balance",
            "none",
            "--models",
            models,
            "--out",
            out,
        ]
    };
    let out = run(&args("decision_tree,knop", "partial"), dir.path());
    assert_eq!(out.status.code(), Some(3));
    let csv = fs::read_to_string(dir.path().join("partial/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let out = run(&args("knop", "none"), dir.path());
    assert_eq!(out.status.code(), Some(3));
    let mut files: Vec<String> = fs::read_dir(dir.path().join("none"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, vec!["manifest.json"]);
}

#[test]
fn compare_balancing_with_identical_arms_has_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    let out = run(
        &[
            "compare-balancing",
            "--data",
            "toy.csv",
            "--iterations",
            "2",
            "--pool-size",
            "5",
            "--models",
            "bagging_tree,decision_tree",
            "--left",
            "none",
            "--right",
            "none",
            "--out",
            "cmp",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 4);
    assert!(rows.iter().all(|r| r.ends_with(",0.0000")), "{csv}");
}

#[test]
fn report_rerenders_markdown() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    let out = run(
        &[
            "experiment",
            "--data",
            "toy.csv",
            "--iterations",
            "2",
            "--pool-size",
            "4",
            "--models",
            "bagging_nb",
            "--balance",
            "none,bbb",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let out = run(&["report", "r/results.csv"], dir.path());
    assert!(out.status.success());
    let md = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        md,
        fs::read_to_string(dir.path().join("r/results.md")).unwrap()
    );
}

#[test]
fn train_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    for (model, file) in [("bagging_tree", "pool.jsonl"), ("knn", "knn.jsonl")] {
        let out = run(
            &[
                "train",
                "--data",
                "toy.csv",
                "--model",
                model,
                "--mode",
                "whole_set",
                "--pool-size",
                "5",
                "--out",
                file,
            ],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = run(
            &["evaluate", "--artifact", file, "--data", "toy.csv"],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(m["accuracy"].as_f64().unwrap() > 0.5);
    }
    let out = run(
        &[
            "train", "--data", "toy.csv", "--model", "knop", "--out", "x.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn hardness_writes_per_class_cdfs() {
    let dir = tempfile::tempdir().unwrap();
    toy_csv(dir.path());
    let out = run(
        &[
            "hardness", "--data", "toy.csv", "--k", "3", "--on", "full", "--out", "h",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("h/kdn_summary.csv")).unwrap();
    assert!(summary.starts_with("class,mean_before,mean_after,delta\n"));
    let before = fs::read_to_string(dir.path().join("h/kdn_before.csv")).unwrap();
    assert_eq!(before.lines().count(), 21);
    let after = fs::read_to_string(dir.path().join("h/kdn_after.csv")).unwrap();
    assert_eq!(after.lines().count(), 1 + 2 * 14);
    let cdf = fs::read_to_string(dir.path().join("h/kdn_cdf_before_positive.csv")).unwrap();
    assert!(cdf.trim_end().ends_with(",1.000000"), "{cdf}");
}
