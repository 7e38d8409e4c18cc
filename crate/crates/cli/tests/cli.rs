use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bundle-eq"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn price(menu: &Value, lottery: &[f64]) -> f64 {
    menu.as_array()
        .unwrap()
        .iter()
        .find(|o| {
            o["lottery"]
                .as_array()
                .unwrap()
                .iter()
                .zip(lottery)
                .all(|(x, y)| (x.as_f64().unwrap() - y).abs() < 1e-9)
        })
        .map(|o| o["price"].as_f64().unwrap())
        .unwrap_or(f64::NAN)
}

#[test]
fn mech_on_fig4_offers_the_rationing_lottery() {
    let out = json(&run(&["mech", "--scenario", "fig4", "--alpha", "1,0"]));
    assert!((price(&out["menu"], &[0.9, 1.0]) - 3.8).abs() < 1e-6);
    assert!((price(&out["menu"], &[1.0, 1.0]) - 3.9735).abs() < 1e-3);
    assert_eq!(out["certificate"]["passed"], Value::Bool(true));
}

#[test]
fn empty_menu_leaves_learning_indeterminate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "[]").unwrap();
    let out = json(&run(&["br-buyer", "--scenario", "intro", "--menu", path.to_str().unwrap()]));
    let br = &out["best_response"];
    assert_eq!(br["expected_utility"].as_f64(), Some(0.0));
    assert_eq!(br["indeterminate"], Value::Bool(true));
}

#[test]
fn menu_written_by_mech_is_read_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mech.json");
    let p = path.to_str().unwrap();
    let out = run(&["mech", "--scenario", "fig3", "--alpha", "0.74,0.26", "--out", p]);
    assert!(out.status.success());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let br = json(&run(&["br-buyer", "--scenario", "fig3", "--menu", p]));
    assert_eq!(br["menu"], written["menu"]);
}

#[test]
fn commands_are_deterministic() {
    let args = ["mech", "--scenario", "perturbed", "--alpha", "1,1"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn csv_output_is_one_row_per_point() {
    let out = run(&["mech", "--scenario", "intro", "--alpha", "1,1", "--format", "csv", "--points", "11"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,theta_1,theta_2,option_id,payoff");
    assert_eq!(lines.len(), 12);
}

#[test]
fn scenario_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"mu": [2, 2], "sigma": [2, 2], "rho": 0, "radius": 1}"#).unwrap();
    let from_file = json(&run(&["mech", "--scenario", path.to_str().unwrap(), "--alpha", "1,1"]));
    let preset = json(&run(&["mech", "--scenario", "intro", "--alpha", "1,1"]));
    assert_eq!(from_file["menu"], preset["menu"]);
}

fn code(args: &[&str]) -> Option<i32> {
    run(args).status.code()
}

#[test]
fn input_errors_exit_with_status_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mu": [1, 2], "sigma": [1, -1], "rho": 0}"#).unwrap();
    let bad = bad.to_str().unwrap();

    assert_eq!(code(&["mech", "--scenario", "no-such-preset", "--alpha", "1,0"]), Some(2));
    assert_eq!(code(&["mech", "--scenario", "intro", "--alpha", "1,x"]), Some(2));
    assert_eq!(code(&["mech", "--scenario", "intro", "--alpha", "1,0,0"]), Some(2));
    assert_eq!(code(&["mech", "--scenario", "intro"]), Some(2));
    assert_eq!(code(&["br-buyer", "--scenario", "intro", "--menu", "/no/such/menu.json"]), Some(2));
    assert_eq!(code(&["mech", "--scenario", bad, "--alpha", "1,1"]), Some(2));

    let out = run(&["mech", "--scenario", bad, "--alpha", "1,1"]);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("sigma"), "{msg}");
}

#[test]
fn thread_cap_must_be_positive() {
    let out = bin()
        .args(["mech", "--scenario", "intro", "--alpha", "1,1"])
        .env("BUNDLE_EQ_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = bin()
        .args(["mech", "--scenario", "intro", "--alpha", "1,1"])
        .env("BUNDLE_EQ_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn paper_fig4_table_matches_the_caption() {
    let out = json(&run(&["paper", "--example", "fig4"]));
    let rows = out["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert_eq!(r["within"], Value::Bool(true), "{r}");
    }
}

#[test]
fn paper_intro_reports_the_deviation() {
    let out = json(&run(&["paper", "--example", "intro"]));
    let row = out["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["quantity"] == "bundle price")
        .unwrap();
    assert_eq!(row["paper"].as_f64(), Some(3.12));
    let delta = row["abs_delta"].as_f64().unwrap();
    assert!((delta - (row["computed"].as_f64().unwrap() - 3.12).abs()).abs() < 1e-15);
}

#[test]
fn check_passes_on_a_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("check.json");
    let out = run(&["check", "--scenario", "fig3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&path)).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().all(|o| o["passed"] == Value::Bool(true)));
}
