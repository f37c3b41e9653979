use std::path::Path;
use std::process::{Command, Output};

use korosmol::analysis::bound_model;
use korosmol::experiment::{CSV_COLUMNS, CSV_VERSION};
use serde_json::Value;

fn korosmol(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_korosmol"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn grid_writes_counts_and_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = korosmol(&["grid", "--d", "2", "--m", "1", "--out", "g.json"], dir.path());
    assert!(out.status.success());
    let v = read_json(&dir.path().join("g.json"));
    assert_eq!(v["multiset"], 39);
    assert_eq!(v["distinct"], 33);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 33);
}

#[test]
fn oversized_grid_exits_with_resource_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = korosmol(&["grid", "--d", "5", "--m", "20", "--out", "g.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("g.json").exists());
}

#[test]
fn cross_reports_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = korosmol(&["cross", "--d", "2", "--a", "3", "--out", "c.json"], dir.path());
    assert!(out.status.success());
    let v = read_json(&dir.path().join("c.json"));
    assert_eq!(v["count"], 33);
    assert_eq!(v["indices"].as_array().unwrap().len(), 33);
    let bad = korosmol(&["cross", "--d", "2", "--a", "0.5", "--out", "c.json"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn decreasing_levels_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"d":1,"r":2.0,"levels":[3,2],"test_function":{"kind":"random_g","degree":3,"seed":1}}"#,
    )
    .unwrap();
    let out = korosmol(&["sweep", "--config", "cfg.json", "--out", "s.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("levels not increasing"));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"d":1,"r":2.0,"levels":[1],"colour":"red","test_function":{"kind":"random_g","degree":3,"seed":1}}"#,
    )
    .unwrap();
    let out = korosmol(&["sweep", "--config", "cfg.json", "--out", "s.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"d":2,"r":2.0,"levels":[1,2,3,4],"test_function":{"kind":"random_g","degree":3,"seed":4}}"#,
    )
    .unwrap();
    let out = korosmol(&["sweep", "--config", "cfg.json", "--out", "s.csv"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# {CSV_VERSION}"));
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let mut previous = f64::INFINITY;
    for row in &rows {
        let m: u32 = row[3].parse().unwrap();
        let model: f64 = row[8].parse().unwrap();
        assert!((model - bound_model(m, 2, 2.0)).abs() <= 1e-15 * model);
        let err: f64 = row[6].parse().unwrap();
        assert!(err < previous);
        previous = err;
    }
    assert!(dir.path().join("s.csv.fit.json").exists());
}

#[test]
fn sweep_json_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"d":1,"r":2.0,"levels":[1,2,3,4,5],"test_function":{"kind":"modes","entries":[[1,0.5,0.0],[-1,0.5,0.0]]}}"#,
    )
    .unwrap();
    let out = korosmol(&["sweep", "--config", "cfg.json", "--out", "s.json", "--json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("s.json"));
    assert_eq!(v["records"].as_array().unwrap().len(), 5);
}

#[test]
fn approx_emits_a_translate_combination() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"d":1,"r":2.0,"levels":[3],"test_function":{"kind":"random_g","degree":3,"seed":1}}"#,
    )
    .unwrap();
    let out = korosmol(&["approx", "--config", "cfg.json", "--m", "2", "--out", "a.json"], dir.path());
    assert!(out.status.success());
    let v = read_json(&dir.path().join("a.json"));
    assert_eq!(v["n_multiset"], 17);
    assert_eq!(v["n_distinct"], 13);
    assert!(v["combination"]["terms"].as_array().unwrap().len() <= 13);
}

#[test]
fn worstcase_history_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = korosmol(
        &["worstcase", "--d", "1", "--r", "2", "--op", "qm", "--m", "4", "--box", "32", "--out", "w.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let v = read_json(&dir.path().join("w.json"));
    let estimate = v["estimate"].as_f64().unwrap();
    let history = v["history"].as_array().unwrap();
    assert_eq!(history.last().unwrap().as_f64().unwrap(), estimate);
}

#[test]
fn help_succeeds_and_unknown_subcommands_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(korosmol(&["--help"], dir.path()).status.success());
    assert_eq!(korosmol(&["bogus"], dir.path()).status.code(), Some(1));
}
