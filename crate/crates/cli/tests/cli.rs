use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aklt-gap"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn lattice_counts() {
    let out = run(&["lattice", "--m1", "3", "--m2", "4"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 24);
    assert_eq!(v["edges"].as_array().unwrap().len(), 36);
}

#[test]
fn patch_documents() {
    let f = json(&run(&["patch", "--kind", "F", "--a", "1.4"]));
    assert_eq!(f["vertices"].as_array().unwrap().len(), 36);
    let f12 = json(&run(&["patch", "--kind", "F12", "--a", "1.2"]));
    assert_eq!(f12["vertices"].as_array().unwrap().len(), 12);
    assert!(!run(&["patch", "--kind", "G"]).status.success());
}

#[test]
fn criterion_published_values() {
    let out = run(&["criterion", "--a", "1.4", "--gamma-f", "0.145"]);
    assert!(out.status.success());
    let v = json(&out);
    let c = &v["criterion"];
    assert!(c["certified"].as_bool().unwrap());
    assert!(c["bound"].as_f64().unwrap() >= 0.00646);
    assert_eq!(v["cover_counts"]["edges_checked"].as_u64().unwrap(), 432);
}

#[test]
fn criterion_bad_weight_exits_nonzero() {
    let out = run(&["criterion", "--a", "0.5", "--gamma-f", "0.145"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!json(&out)["errors"].as_array().unwrap().is_empty());
}

#[test]
fn cover_check_small_torus_fails() {
    let out = run(&["cover-check", "--m1", "11", "--m2", "12", "--a", "1.4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["cover-check", "--m1", "12", "--m2", "12", "--a", "1.4"]);
    assert!(out.status.success());
}

#[test]
fn degeneracy_table() {
    let v = json(&run(&["degeneracy", "--n", "6"]));
    let mult: Vec<u64> = v["multiplicities"]["mult"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert_eq!(mult, vec![15, 36, 40, 29, 15, 5, 1]);
}

#[test]
fn vbs_ring_sector() {
    let out = run(&["vbs", "--kind", "ring", "--a", "1", "--two-m", "-2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let k = &json(&out)["kernel"];
    assert_eq!(k["states"], k["expected"]);
}

#[test]
fn gap_on_ring_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let gaps = dir.path().join("gaps.csv");
    let report = dir.path().join("report.json");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[patch]\nkind = \"ring\"\na = 1.0\n[solver]\neigenpairs = 2\n[output]\ngaps = {:?}\n",
            gaps.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&[
        "gap",
        "--config",
        cfg.to_str().unwrap(),
        "--sectors",
        "0,2,4",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["spectra"].as_array().unwrap().len(), 3);
    assert!(v["gap_table"]["gamma"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(&gaps).unwrap().starts_with("J,"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[criterion]\na = 1.2\ngamma_f = 0.145\n").unwrap();
    let v = json(&run(&["criterion", "--config", cfg.to_str().unwrap(), "--a", "1.4"]));
    assert_eq!(v["criterion"]["a"].as_f64().unwrap(), 1.4);
    assert_eq!(v["config"]["criterion"]["a"].as_f64().unwrap(), 1.4);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[criterion]\nalpha = 1.2\n").unwrap();
    let out = run(&["criterion", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn empty_sector_list_is_an_error() {
    let out = run(&["gap", "--kind", "ring", "--sectors", ""]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_variable_is_validated() {
    let out = bin()
        .env("AKLT_GAP_THREADS", "zero")
        .args(["criterion"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().env("AKLT_GAP_THREADS", "1").args(["criterion"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn report_combines_pieces() {
    let v = json(&run(&["report"]));
    assert!(v["multiplicities"].is_object());
    assert!(v["sector_table"].is_array());
    assert!(v["cover_counts"].is_object());
    assert!(v["criterion"]["certified"].as_bool().unwrap());
    assert!(v["certifying"].as_bool().unwrap());
    assert!(v["constants"]["published_gamma_f"].is_number());
}
