use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disctree")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

/// Draws a synthetic dataset through the `sample` subcommand.
fn sample(dir: &Path, mixture: &str, count: usize, seed: u64) -> String {
    let out = dir.join(format!("{mixture}-{seed}"));
    ok(&["sample", "--mixture", mixture, "--count", &count.to_string(), "--seed", &seed.to_string(), "--out", out.to_str().unwrap()]);
    path(&out, "samples.csv")
}

#[test]
fn uniform_data_with_a_loose_threshold_is_one_cell() {
    let tmp = TempDir::new().unwrap();
    let input = sample(tmp.path(), "uniform", 2_000, 3);
    let out = path(tmp.path(), "est");
    ok(&["estimate", "--input", &input, "--theta", "10", "--out", &out]);
    let doc = json(Path::new(&out), "partition.json");
    let leaves = doc["nodes"].as_array().unwrap().iter().filter(|n| n["split_dim"].is_null()).count();
    assert_eq!(leaves, 1, "{doc}");
    let report = json(Path::new(&out), "report.json");
    assert_eq!(report["seed"], 0);
}

#[test]
fn four_corner_data_gives_a_tree_with_four_leaves() {
    let tmp = TempDir::new().unwrap();
    let input = sample(tmp.path(), "four-corners", 10_000, 7);
    let out = tmp.path().join("tree");
    ok(&["tree", "--input", &input, "--out", out.to_str().unwrap()]);

    let dot = fs::read_to_string(out.join("levelset.dot")).unwrap();
    assert!(dot.starts_with("// seed: 0\n"), "{dot}");
    let nodes: Vec<&str> = dot.lines().filter(|l| l.contains("[label=")).collect();
    let parents: HashSet<&str> =
        dot.lines().filter_map(|l| l.split("-> ").nth(1)).map(|p| p.trim_end_matches(';')).collect();
    let leaves = nodes.iter().filter(|l| !parents.contains(l.split_whitespace().next().unwrap())).count();
    assert_eq!(leaves, 4, "{dot}");

    let doc = json(&out, "levelset.json");
    let ids: HashSet<u64> = doc["nodes"].as_array().unwrap().iter().filter_map(|n| n["parent"].as_u64()).collect();
    let json_leaves = doc["nodes"].as_array().unwrap().iter().filter(|n| !ids.contains(&n["id"].as_u64().unwrap())).count();
    assert_eq!(json_leaves, 4);
}

#[test]
fn modes_lists_the_four_corners() {
    let tmp = TempDir::new().unwrap();
    let input = sample(tmp.path(), "four-corners", 10_000, 11);
    let out = tmp.path().join("modes");
    ok(&["modes", "--input", &input, "--out", out.to_str().unwrap()]);
    let doc = json(&out, "modes.json");
    let modes = doc["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 4, "{doc}");
    for m in modes {
        for c in m["center"].as_array().unwrap() {
            let c = c.as_f64().unwrap();
            assert!((c - 0.25).abs() < 0.15 || (c - 0.75).abs() < 0.15, "{m}");
        }
    }
}

#[test]
fn eval_writes_csv_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("eval");
    ok(&["eval", "--experiment", "slope", "--sizes", "200,2000", "--replicas", "2", "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# seed=0"));
    assert_eq!(lines.next(), Some("size,replica,error"));
    assert_eq!(lines.count(), 4);
    let summary = json(&out, "summary.json");
    assert!(summary["slope"].is_f64(), "{summary}");
    assert_eq!(summary["mean_errors"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_input_exits_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("text.csv", "x,y\n0.1,0.2\n0.3,abc\n", "not a finite number"),
        ("range.csv", "0.1,0.2\n0.3,1.7\n", "outside [0, 1]"),
        ("ragged.csv", "0.1,0.2\n0.3\n", "expected 2 columns"),
        ("nan.csv", "0.1,NaN\n", "not a finite number"),
        ("empty.csv", "", ""),
    ];
    for (name, body, message) in cases {
        let file = tmp.path().join(name);
        fs::write(&file, body).unwrap();
        let out = run(&["estimate", "--input", file.to_str().unwrap(), "--out", &path(tmp.path(), "o")]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(message), "{name}: {stderr}");
    }
    let out = run(&["estimate", "--input", &path(tmp.path(), "missing.csv"), "--out", &path(tmp.path(), "o")]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn rescale_accepts_data_outside_the_unit_cube() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("wide.csv");
    fs::write(&file, "a,b\n-3,10\n5,20\n1,15\n2,12\n").unwrap();
    let out = tmp.path().join("o");
    ok(&["estimate", "--input", file.to_str().unwrap(), "--rescale", "--out", out.to_str().unwrap()]);
    let doc = json(&out, "partition.json");
    assert_eq!(doc["metadata"]["rescale"]["min"], serde_json::json!([-3.0, 10.0]));
}

#[test]
fn bad_parameters_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let input = sample(tmp.path(), "uniform", 100, 1);
    for flag in [["--theta", "-1"], ["--m", "1"]] {
        let out = run(&["estimate", "--input", &input, flag[0], flag[1], "--out", &path(tmp.path(), "o")]);
        assert_eq!(out.status.code(), Some(2), "{flag:?}");
    }
}

#[test]
fn repeat_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let input = sample(tmp.path(), "beta-bimodal", 5_000, 5);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["estimate", "--input", &input, "--out", dir.to_str().unwrap()]);
        ok(&["tree", "--input", &input, "--out", dir.to_str().unwrap()]);
    }
    for name in ["partition.json", "report.json", "levelset.dot", "levelset.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let again = sample(tmp.path(), "beta-bimodal", 5_000, 5);
    assert_eq!(again, input);
}

#[test]
fn saved_partitions_reproduce_the_analysis() {
    let tmp = TempDir::new().unwrap();
    let input = sample(tmp.path(), "four-corners", 4_000, 9);
    let (fresh, reused) = (tmp.path().join("fresh"), tmp.path().join("reused"));
    ok(&["estimate", "--input", &input, "--out", fresh.to_str().unwrap()]);
    ok(&["modes", "--input", &input, "--out", fresh.to_str().unwrap()]);
    ok(&["tree", "--input", &input, "--out", fresh.to_str().unwrap()]);
    let saved = path(&fresh, "partition.json");
    ok(&["modes", "--partition", &saved, "--out", reused.to_str().unwrap()]);
    ok(&["tree", "--partition", &saved, "--out", reused.to_str().unwrap()]);
    assert_eq!(json(&fresh, "modes.json")["modes"], json(&reused, "modes.json")["modes"]);
    assert_eq!(json(&fresh, "levelset.json")["nodes"], json(&reused, "levelset.json")["nodes"]);
}
