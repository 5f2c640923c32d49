use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn submodtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_submodtree")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decompose_single_edge_cut() {
    let dir = tempfile::tempdir().unwrap();
    let out = submodtree(&[
        "decompose",
        "--family",
        "cut",
        "--edges",
        "1-2",
        "--n",
        "2",
        "--alpha",
        "0.5",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&dir.path().join("report.json"));
    assert!(report["rank"].as_u64().unwrap() <= 4);
    assert_eq!(report["pass"], Value::Bool(true));
    assert!(dir.path().join("tree.json").exists());
    let rank = fs::read_to_string(dir.path().join("rank.csv")).unwrap();
    assert!(rank.starts_with("instance,phase,alpha,rank,rank_bound,claimed_rank_bound,pass\n"));
    assert!(rank.trim_end().ends_with(",true"));
}

#[test]
fn decompose_and_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let and2 = dir.path().join("and2.json");
    fs::write(&and2, "[0, 0, 0, 1]").unwrap();
    let out = submodtree(&["decompose", "--family", "truth_table", "--file", arg(&and2), "--alpha", "0.5"]);
    assert_eq!(code(&out), 2);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["input_submodular"], Value::Bool(false));
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = submodtree(&["decompose", "--file", "/nonexistent/spec.json", "--alpha", "0.5"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/spec.json"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(code(&submodtree(&["verify", "nonsense"])), 1);
    assert_eq!(code(&submodtree(&["decompose", "--family", "cut", "--n", "3", "--alpha", "-1"])), 1);
    assert_eq!(code(&submodtree(&["learn", "pac", "--family", "cut", "--n", "4", "--epsilon", "0.5"])), 1);
    assert_eq!(code(&submodtree(&["--help"])), 0);
}

#[test]
fn decompose_with_epsilon_checks_the_error() {
    let out = submodtree(&["decompose", "--family", "budget_additive", "--n", "9", "--epsilon", "0.5", "--seed", "2"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["l2_error"].as_f64().unwrap() <= 0.5);
}

#[test]
fn discrete_phase() {
    let out = submodtree(&[
        "decompose",
        "--family",
        "matroid_rank_partition",
        "--blocks",
        "1,2;3",
        "--caps",
        "1,1",
        "--n",
        "3",
        "--phase",
        "discrete",
        "--k",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["rank"].as_u64().unwrap() <= 4);
    assert_eq!(report["l2_error"].as_f64(), Some(0.0));
}

#[test]
fn verify_pruning_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = submodtree(&["verify", "pruning", "--n", "10", "--seeds", "50", "--out", arg(dir.path())]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("verify-pruning.csv")).unwrap();
    assert_eq!(csv.as_bytes(), out.stdout.as_slice());
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("instance,lhs,rhs,margin,pass"));
    assert!(lines.all(|l| l.ends_with(",true")));
}

#[test]
fn verify_correlation_matches_on_every_row() {
    let out = submodtree(&["verify", "correlation", "--smax", "16"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("s16/closed-form,"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn verify_all_passes() {
    let out = submodtree(&["verify", "all", "--n", "8"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for suite in ["variance/", "pruning/", "rank/", "pairwise/", "correlation/", "embedding/", "parseval/"] {
        assert!(text.contains(&format!("\n{suite}")), "{suite}");
    }
}

#[test]
fn learn_pac_on_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let out = submodtree(&[
        "learn",
        "pac",
        "--family",
        "coverage",
        "--n",
        "10",
        "--epsilon",
        "0.25",
        "--seed",
        "7",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let run = json_file(&dir.path().join("run.json"));
    assert!(run["exact_l2_error"].as_f64().unwrap() <= 0.25);
    for key in ["J", "gamma", "degree", "samples", "queries"] {
        assert!(run.get(key).is_some(), "{key}");
    }
    let csv = fs::read_to_string(dir.path().join("hypothesis.csv")).unwrap();
    assert!(csv.starts_with("mask,coefficient\n"));
}

#[test]
fn learn_exact_above_cap_explains() {
    let out = submodtree(&["learn", "pac", "--family", "coverage", "--n", "30", "--epsilon", "0.25", "--exact"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("enumeration cap"));
}

#[test]
fn learn_agnostic_against_competitor() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    let values: Vec<String> = (0..32u32).map(|x| format!("{}", (x.count_ones() as f64 / 5.0).min(0.8))).collect();
    fs::write(&table, format!("[{}]", values.join(","))).unwrap();
    let competitor = dir.path().join("g.csv");
    fs::write(&competitor, "mask,coefficient\n0,5e-1\n1,-1e-1\n").unwrap();
    let out = submodtree(&[
        "learn",
        "agnostic-l2",
        "--file",
        arg(&table),
        "--L",
        "1.5",
        "--epsilon",
        "0.5",
        "--seed",
        "1",
        "--competitor",
        arg(&competitor),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = json_file(&dir.path().join("run.json"));
    assert_eq!(run["competitor"]["in_class"], Value::Bool(true));
    assert_eq!(run["competitor"]["holds"], Value::Bool(true));
    assert_eq!(run["contract_holds"], Value::Bool(true));
}

#[test]
fn hardness_correlation_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = submodtree(&["hardness", "correlation", "--smax", "12", "--out", arg(dir.path())]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,closed_form,brute_force,monotone,exact_match,half_identity,scaled_magnitude"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("2,-1/2,-1/2,-1/4,true,true,"));
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("true")));
}

#[test]
fn hardness_embed_xor() {
    let dir = tempfile::tempdir().unwrap();
    let xor3 = dir.path().join("xor3.json");
    fs::write(&xor3, "[0, 1, 1, 0, 1, 0, 0, 1]").unwrap();
    let out = submodtree(&["hardness", "embed", "--k", "3", "--f", arg(&xor3), "--out", arg(dir.path())]);
    assert_eq!(code(&out), 0);
    let report = json_file(&dir.path().join("embedding.json"));
    for key in ["round_trip_exact", "h_monotone", "h_submodular", "perturbed_within_epsilon"] {
        assert_eq!(report[key], Value::Bool(true), "{key}");
    }
    assert_eq!(report["max_f_queries_per_h_query"], 1);

    let half = dir.path().join("half.json");
    fs::write(&half, "[0, 0.5]").unwrap();
    assert_eq!(code(&submodtree(&["hardness", "embed", "--f", arg(&half)])), 1);
}

#[test]
fn hardness_lpn_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = submodtree(&[
        "hardness",
        "lpn",
        "--n",
        "16",
        "--k",
        "2",
        "--eta",
        "0.1",
        "--trials",
        "30",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let report = json_file(&dir.path().join("lpn.json"));
    assert!(report["success_rate"].as_f64().unwrap() >= 0.66);
}

#[test]
fn spectrum_of_single_edge_cut() {
    let out = submodtree(&["spectrum", "--family", "cut", "--edges", "1-2", "--n", "2"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "mask,coefficient\n0,5.0000000000000000e-1\n3,-5.0000000000000000e-1\n"
    );
}
