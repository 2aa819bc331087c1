use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn saddle(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddle"))
        .current_dir(dir)
        .env_remove("SADDLE_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const MONKEY: &str = r#"{
  "name": "monkey",
  "function": { "terms": [[3, 0, 1], [1, 2, -3]] },
  "analyses": [
    { "kind": "saddle" },
    { "kind": "index", "field": { "which": "grad-nu", "nu": [1, 0] }, "expect": "-1" },
    { "kind": "doubling" }
  ]
}"#;

#[test]
fn monkey_saddle_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "m.json", MONKEY);
    let out = saddle(tmp.path(), &["run", "m.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("o"));
    assert_eq!(r["schema"], "saddle-report/1");
    assert_eq!(r["pass"], true);
    assert_eq!(r["outcomes"][1]["result"]["report"]["index"], "-1");
    assert_eq!(r["outcomes"][2]["result"]["z_index"]["index"], "-1");
    assert_eq!(r["outcomes"][2]["result"]["cross_index"]["index"], "-1/2");
}

#[test]
fn elliptic_point_fails_the_saddle_assertion() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "b.json", r#"{"function": {"terms": [[2,0,1],[0,2,1]]}, "analyses": [{"kind": "saddle"}]}"#);
    let out = saddle(tmp.path(), &["run", "b.json", "--out", "."]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(tmp.path());
    assert_eq!(r["outcomes"][0]["status"], "fail");
    assert_eq!(r["outcomes"][0]["result"]["worst_value"], 4.0);
}

#[test]
fn configuration_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "u.json", &MONKEY.replace("\"name\"", "\"title\""));
    assert_eq!(saddle(tmp.path(), &["run", "u.json"]).status.code(), Some(3));
    assert_eq!(saddle(tmp.path(), &["run", "missing.json"]).status.code(), Some(3));
    assert_eq!(saddle(tmp.path(), &["run"]).status.code(), Some(3));
    write(tmp.path(), "p.json", r#"{"waist_radius": -1}"#);
    assert_eq!(saddle(tmp.path(), &["sphere", "p.json"]).status.code(), Some(3));
}

#[test]
fn non_stabilizing_index_exits_4() {
    // No halvings allowed: there is never a second radius to confirm the first.
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.json",
        r#"{"function": {"terms": [[3,0,1],[1,2,-3]]},
            "analyses": [{"kind": "saddle"},
                         {"kind": "index", "field": {"which": "z"}, "settings": {"max_halvings": 0}}]}"#,
    );
    let out = saddle(tmp.path(), &["run", "s.json", "--out", "."]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(report(tmp.path())["outcomes"][1]["status"], "unstable");
}

#[test]
fn reports_are_deterministic_and_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = r#"{"function": {"terms": [[4,0,1],[0,4,-1],[2,2,"1/3"]]},
                 "analyses": [{"kind": "index", "field": {"which": "grad-nu"}}, {"kind": "umbilic"}]}"#;
    write(tmp.path(), "d.json", sc);
    let strip = |mut v: Value| {
        v["wall_time"] = Value::Null;
        v
    };
    let mut runs = Vec::new();
    for (dir, seed) in [("a", "11"), ("b", "11"), ("c", "12")] {
        let out = saddle(tmp.path(), &["run", "d.json", "--out", dir, "--seed", seed]);
        assert!(out.status.code().is_some());
        runs.push(strip(report(&tmp.path().join(dir))));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0]["seed"], 11);
    assert_eq!(runs[2]["seed"], 12);
}

#[test]
fn grid_subcommand_writes_row_major_csv() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "g.json",
        r#"{"function": {"terms": [[3,0,1],[3,1,1]]},
            "analyses": [{"kind": "saddle"},
                         {"kind": "field-grid", "field": {"which": "principal"}, "n": 5, "file": "p.csv"},
                         {"kind": "field-grid", "field": {"which": "z"}, "n": 2, "file": "z.csv"}]}"#,
    );
    let out = saddle(tmp.path(), &["grid", "g.json", "--out", "g"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("g"));
    // Only the grids ran.
    assert_eq!(r["outcomes"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(tmp.path().join("g/p.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 25);
    assert_eq!(&rows[0][..2], ["-0.5", "-0.5"]);
    assert_eq!(&rows[1][..2], ["-0.25", "-0.5"]);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert!(rows.iter().any(|r| r[4] == "extended"));
    assert_eq!(rows[12][4], "origin");
    let z = std::fs::read_to_string(tmp.path().join("g/z.csv")).unwrap();
    assert_eq!(z.lines().count(), 5);
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "m.json", MONKEY);
    let out = Command::new(env!("CARGO_BIN_EXE_saddle"))
        .current_dir(tmp.path())
        .env("SADDLE_OUT_DIR", "from-env")
        .args(["run", "m.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from-env/report.json").exists());
}

#[test]
fn sphere_default_writes_a_passing_atlas() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "p.json", "{}");
    let out = saddle(tmp.path(), &["sphere", "p.json", "--out", "atlas"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("atlas/atlas.json")).unwrap()).unwrap();
    assert_eq!(manifest["report"]["pass"], true);
    let samples = std::fs::read_to_string(tmp.path().join("atlas/atlas_samples.csv")).unwrap();
    assert!(samples.starts_with("x0,x1,x2,x3,chart,ksign"));
    assert!(samples.lines().skip(1).all(|l| !l.ends_with(",1")));
}

#[test]
fn catalog_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        assert_eq!(saddle(tmp.path(), &["catalog", "5", "12", "--out", dir]).status.code(), Some(0));
    }
    let a = std::fs::read_to_string(tmp.path().join("a/catalog.json")).unwrap();
    assert_eq!(a, std::fs::read_to_string(tmp.path().join("b/catalog.json")).unwrap());
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 12);
}
