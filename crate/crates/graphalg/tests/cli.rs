//! The `graphalg` binary end to end: exit codes, output formats and threads.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

const Z2: &str = include_str!("../fixtures/z2_free_product.json");
const LOOP: &str = include_str!("../fixtures/integer_loop.json");
const Z4: &str = include_str!("../fixtures/z4_amalgam.json");

fn write(name: &str, text: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn edited(name: &str, base: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut doc: Value = serde_json::from_str(base).unwrap();
    edit(&mut doc);
    write(name, &doc.to_string())
}

fn graphalg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphalg")).args(args).env_remove("GRAPHALG_THREADS").output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn validate_accepts_shipped_descriptor() {
    let path = write("validate_z2.json", Z2);
    let out = graphalg(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("valid: 2 vertices, 1 edge pairs"));
}

#[test]
fn validate_json_summary() {
    let path = write("validate_loop.json", LOOP);
    let out = graphalg(&["validate", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["valid"], json!(true));
    assert_eq!(doc["edge_pairs"], json!(["e"]));
    assert_eq!(doc["tree"], json!([]));
    assert_eq!(doc["base"], json!("p"));
}

#[test]
fn tampered_expectation_names_the_bimodule_law() {
    // E(g) = E(g³) = 1 keeps idempotence, unitality, range and adjoints but
    // breaks E(g²·g) = g²·E(g)
    let path = edited("tampered.json", Z4, |d| {
        d["expectations"] = json!({ "e": [[1, 1, 0, 1], [0, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 0]] });
    });
    let out = graphalg(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("bimodule"), "{err}");
}

#[test]
fn non_injective_embedding_fails_certification() {
    let path = edited("collapsed.json", Z4, |d| {
        d["embeddings"]["e"] = json!({ "group": [0, 0] });
    });
    let out = graphalg(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out.stderr));
}

#[test]
fn missing_edge_partner_is_a_schema_error() {
    let path = edited("unpaired.json", Z2, |d| {
        let edges = d["graph"]["edges"].as_array_mut().unwrap();
        edges.retain(|e| e["label"] != json!("ē"));
    });
    let out = graphalg(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_json_and_missing_file_exit_2() {
    let path = write("broken.json", "{ \"graph\": ");
    assert_eq!(graphalg(&["validate", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(graphalg(&["validate", "/nonexistent/graph.json"]).status.code(), Some(2));
    assert_eq!(graphalg(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn moments_of_the_free_product_element() {
    let path = write("moments_z2.json", Z2);
    let out = graphalg(&["moments", path.to_str().unwrap(), "--element", "g@p + u@e·h@q·u@ē", "--max-degree", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let rows: Vec<String> = text(&out.stdout).lines().map(str::to_string).collect();
    assert_eq!(rows, ["degree,value", "0,1", "1,0", "2,2", "3,0", "4,6", "5,0", "6,20"]);
}

#[test]
fn moments_json_format() {
    let path = write("moments_loop.json", LOOP);
    let out = graphalg(&["moments", path.to_str().unwrap(), "--element", "u@e", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    let values: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["value"].as_str().unwrap()).collect();
    assert_eq!(values, ["1", "0", "0", "0", "0"]);
}

#[test]
fn bad_expression_exits_2() {
    let path = write("expr_z2.json", Z2);
    for bad in ["g@p +", "w@p", "(g@p"] {
        let out = graphalg(&["moments", path.to_str().unwrap(), "--element", bad]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn word_cap_overflow_exits_3() {
    let path = write("cap_loop.json", LOOP);
    let out = graphalg(&["moments", path.to_str().unwrap(), "--element", "u@e", "--max-degree", "13"]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
    let out = graphalg(&["moments", path.to_str().unwrap(), "--element", "u@e", "--max-degree", "12"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_bassserre_on_the_loop() {
    let path = write("verify_loop.json", LOOP);
    let out = graphalg(&["verify", path.to_str().unwrap(), "--suite", "bassserre", "--depth", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let report = text(&out.stdout);
    assert!(report.contains("suite bassserre: PASS"));
    assert!(report.ends_with("overall: PASS\n"));
}

#[test]
fn verify_json_lists_every_suite() {
    let path = write("verify_z2.json", Z2);
    let out = graphalg(&["verify", path.to_str().unwrap(), "--depth", "3", "--seed", "7", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["pass"], json!(true));
    assert_eq!(doc["depth"], json!(3));
    assert_eq!(doc["seed"], json!(7));
    let names: Vec<&str> = doc["suites"].as_array().unwrap().iter().map(|s| s["suite"].as_str().unwrap()).collect();
    assert_eq!(names, ["algebra", "module", "fundamental", "unscrew", "bassserre"]);
}

#[test]
fn impossible_tolerance_turns_verify_into_failure() {
    let path = write("tolerance_z4.json", Z4);
    let out = graphalg(&["verify", path.to_str().unwrap(), "--suite", "fundamental", "--depth", "3", "--tolerance", "0"]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("overall: FAIL"));
}

#[test]
fn threads_variable_is_honoured_or_warned_about() {
    let path = write("threads_z2.json", Z2);
    let run = |value: &str| {
        Command::new(env!("CARGO_BIN_EXE_graphalg"))
            .args(["verify", path.to_str().unwrap(), "--suite", "algebra"])
            .env("GRAPHALG_THREADS", value)
            .output()
            .unwrap()
    };
    let ok = run("1");
    assert_eq!(ok.status.code(), Some(0));
    assert!(text(&ok.stderr).is_empty());
    let bad = run("many");
    assert_eq!(bad.status.code(), Some(0));
    assert!(text(&bad.stderr).contains("GRAPHALG_THREADS"));
}
