use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scl-lagrange"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn metric(s: &Value, name: &str) -> f64 {
    s["metrics"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["name"] == name)
        .unwrap_or_else(|| panic!("no metric {name}"))["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn bundled_scenarios_pass() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["entropic_shock", "rarefaction", "non_entropic_shock", "cubic_two_shocks", "constant"] {
        let out = tmp.path().join(name);
        let o = run(&["run"], &scenario(name), &out);
        assert!(o.status.success(), "{name}:\n{}", String::from_utf8_lossy(&o.stdout));
        let s = summary(&out);
        assert_eq!(s["all_pass"], true);
        assert_eq!(s["scenario"], name);
        assert!(out.join("config.toml").exists());
    }
    let s = summary(&tmp.path().join("entropic_shock"));
    assert!(metric(&s, "flux/vertical/quadratic/hypograph") <= 0.02);
    assert!(metric(&s, "flux/vertical/quadratic/epigraph") <= 0.02);
}

#[test]
fn non_entropic_production_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate"], &scenario("non_entropic_shock"), tmp.path());
    assert!(o.status.success());
    let mu = summary(tmp.path())["values"]["entropy_production/quadratic"].as_f64().unwrap();
    assert!((mu - 1.0 / 12.0).abs() < 1e-12, "{mu}");
    let fronts = std::fs::read_to_string(tmp.path().join("fronts.csv")).unwrap();
    assert!(fronts.starts_with("# units:"));
    assert!(fronts.lines().nth(1).unwrap().starts_with("t_start,t_end,x_start,speed,u_left,u_right,kind"));
    assert!(fronts.contains("non_entropic_shock"));
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("entropic_shock")).unwrap();
    std::fs::write(&bad, text.replace("kind = \"burgers\"", "kind = \"cubic\"")).unwrap();
    let o = run(&["simulate"], &bad, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    let o = run(&["simulate"], &tmp.path().join("missing.toml"), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["converge", "--grids", "32,64"], &scenario("constant"), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("wrong.toml");
    let text = std::fs::read_to_string(scenario("entropic_shock")).unwrap();
    std::fs::write(&cfg, text.replace("expect_speed = 0.5", "expect_speed = 0.25")).unwrap();
    let o = run(&["characteristic"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL characteristic/0/expected_path"));
}

#[test]
fn outputs_are_bit_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = scenario("cubic_two_shocks");
    assert!(run(&["run", "--seed", "7"], &cfg, &a).status.success());
    assert!(run(&["run", "--seed", "7", "--sequential"], &cfg, &b).status.success());
    let mut files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert!(files.len() >= 6);
    for f in files {
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{f:?}");
    }
    assert_eq!(summary(&a)["seed"], 7);
}

#[test]
fn characteristic_verb_takes_a_start_point() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["characteristic", "--x0", "0.25", "--t0", "0.5", "--levels", "5"], &scenario("rarefaction"), tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(tmp.path().join("characteristic_0.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("t,x,u_minus,u_plus,xprime,target_speed,violation_flag"));
    // straight ray through the fan, x = t / 2, up to the fan mesh and one cell
    let end = summary(tmp.path())["values"]["characteristic/0/end"].as_f64().unwrap();
    assert!((end - 0.5).abs() <= 1.0 / 64.0 + 4.0 / 256.0, "{end}");
}

#[test]
fn shock_convergence_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["converge", "--grids", "64,128,256"], &scenario("entropic_shock"), tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    assert_eq!(s["values"]["flux_gap_monotone"], true);
    assert!(s["values"]["rates"][0].as_f64().unwrap() > 0.5);
}

#[test]
fn constant_scenario_errors_vanish() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["converge"], &scenario("constant"), tmp.path());
    assert!(o.status.success());
    for row in summary(tmp.path())["values"]["rows"].as_array().unwrap() {
        for k in ["flux_gap", "char_residual", "pushforward"] {
            assert!(row[k].as_f64().unwrap() <= 1e-9, "{k}: {row}");
        }
    }
}

#[test]
fn fan_mesh_study_is_first_order() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["converge", "--meshes", "0.0625,0.03125,0.015625"], &scenario("rarefaction"), tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    assert_eq!(s["values"]["reference"], "exact");
    let rate = s["values"]["rates"][1].as_f64().unwrap();
    assert!((rate - 1.0).abs() < 0.1, "{rate}");
    assert!(tmp.path().join("mesh_convergence.csv").exists());
}
