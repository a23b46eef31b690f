use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpcheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn check<'a>(report: &'a Value, id: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == id)
        .unwrap_or_else(|| panic!("no check {id}"))
}

fn without_timestamp(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("timestamp"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn verify_case_1a_passes() {
    let o = run(&["verify-case", "1a", "--c", "-2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["status"], "PASS");
    assert!(check(&r, "gap_K_plus_u")["value"].as_f64().unwrap() > 0.0);
    assert_eq!(check(&r, "eq8_residual")["equation"], "eq8");
    assert_eq!(r["config"]["case"], "1a");
    assert_eq!(r["config"]["c"], -2.0);
}

#[test]
fn verify_case_1b_includes_factorization() {
    let o = run(&["verify-case", "1b", "--c", "-2", "--mu", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(check(&r, "factorization")["status"], "PASS");
    assert_eq!(check(&r, "flat_branch_1b")["status"], "PASS");
    let o = run(&["verify-case", "1b", "--c", "-2", "--mu", "-1"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn verify_case_2b_rejects_zero_lambda() {
    let o = run(&["verify-case", "2b", "--c", "-2", "--lambda", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
    let o = run(&["verify-case", "2b", "--c", "-2", "--lambda", "0.5"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn invalid_combinations_are_config_errors() {
    assert_eq!(code(&run(&["verify-case", "1a", "--mu", "1"])), 2);
    assert_eq!(code(&run(&["verify-case", "3c"])), 2);
    assert_eq!(code(&run(&["verify-case", "1a", "--c", "0"])), 2);
    assert_eq!(code(&run(&["verify-case", "1a", "--grid", "40"])), 2);
    assert_eq!(code(&run(&["verify-case", "1a", "--grid", "5x5"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn positive_h_warns() {
    let o = run(&["verify-case", "1a", "--c", "2"]);
    let r = json(&o);
    assert!(!r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = run(&["verify-case", "1a", "--c", "-2", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert!(o.stdout.is_empty());
    }
    assert_eq!(without_timestamp(&a), without_timestamp(&b));
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(names.len(), 2, "temporary files left behind");
}

#[test]
fn blockcheck_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let p = dir.path().join(name);
        let o = run(&["blockcheck", "--base", "eq12", "--fiber", "sphere", "--seed", "11", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 1);
        texts.push(without_timestamp(&p));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"case": "2b", "c": -2, "lambda": 2, "grid": "20x8", "tolerances": {"gap_K_plus_u": 1e-3}}"#).unwrap();
    let o = run(&["verify-case", "--config", cfg.to_str().unwrap(), "--lambda", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["config"]["lambda"], 0.5);
    assert_eq!(r["config"]["grid"]["n1"], 20);
    assert_eq!(check(&r, "gap_K_plus_u")["tol"], 1e-3);

    fs::write(&cfg, r#"{"case": "1a", "colour": "blue"}"#).unwrap();
    assert_eq!(code(&run(&["verify-case", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["verify-case", "--config", "/nonexistent/c.json"])), 2);
}

#[test]
fn curvature_tables() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    let o = run(&["curvature", "--preset", "eq12", "--domain", "0.5:5", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["values"]["points"], 640);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,theta,K,R");
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        let expect = -20.0 / (v[0] * v[0]);
        assert!((v[2] - expect).abs() <= 1e-6 * expect.abs());
        assert_eq!(v[3], 2.0 * v[2]);
    }

    let o = run(&["curvature", "--preset", "flat"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for line in text.lines().skip(1) {
        let k: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(k.abs() <= 1e-12);
    }

    let o = run(&["curvature", "--vars", "x,y", "--e", "0", "--g", "1", "--domain", "0:1"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
    let o = run(&["curvature", "--vars", "x,y", "--e", "sqrt(x-2)", "--g", "1", "--domain", "0:1"]);
    assert_eq!(code(&o), 3);
    let o = run(&["curvature", "--vars", "x,y", "--e", "2x", "--g", "1", "--domain", "0:1"]);
    assert_eq!(code(&o), 2);
    let o = run(&[
        "curvature", "--vars", "x,y", "--e", "1", "--g", "x^2", "--domain", "1:2", "--signs", "++",
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn blockcheck_examples() {
    let o = run(&["blockcheck", "--base", "flat", "--fiber", "sphere", "--warp", "x", "--mu", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert!(check(&r, "einstein_residuals")["value"].as_f64().unwrap() <= 1e-7);
    assert!(check(&r, "block_identity")["value"].as_f64().unwrap() <= 1e-5);
    assert_eq!(r["config"]["seed"], 0);

    let o = run(&["blockcheck", "--base", "flat", "--fiber", "flat-neg", "--warp", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["values"]["signature"], "(2+2)");

    let o = run(&["blockcheck", "--base", "eq12", "--fiber", "flat"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(check(&r, "block_identity")["status"], "PASS");
    let e = check(&r, "einstein_residuals");
    assert_eq!(e["status"], "FAIL");
    assert!(e["detail"]["base_block"].as_f64().unwrap() > 1.0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL einstein_residuals [eq1]"));

    let o = run(&["blockcheck", "--base", "flat", "--fiber", "sphere", "--warp", "x - 1"]);
    assert_eq!(code(&o), 3, "non-positive warp");
}

#[test]
fn solve_presets() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("u.csv");
    let rep = dir.path().join("u.json");
    let o = run(&[
        "solve", "--preset", "eq12-u", "--out", csv.to_str().unwrap(), "--report", rep.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(r["values"]["converged"], true);
    assert!(r["values"]["final_residual"].as_f64().unwrap() <= 1e-9);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "r,theta,value,residual");
    assert_eq!(text.lines().count(), 1 + 64 * 32);

    let o = run(&["solve", "--preset", "flat-affine"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["values"]["newton_iterations"], 1);
    assert!(r["values"]["final_residual"].as_f64().unwrap() <= 1e-11);

    let o = run(&["solve", "--preset", "eq12-u", "--max-iter", "1"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["values"]["converged"], false);
    assert_eq!(r["values"]["residual_trace"].as_array().unwrap().len(), 2);

    assert_eq!(code(&run(&["solve"])), 2);
    assert_eq!(code(&run(&["solve", "--preset", "nope"])), 2);
}

#[test]
fn residual_table() {
    let o = run(&["residuals", "2b", "--lambda", "1", "--grid", "10x4"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,theta,u,eq17,eq18,eq19");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 40);
    for row in rows {
        for cell in row.split(',').skip(3) {
            assert!(cell.parse::<f64>().unwrap().abs() <= 1e-9);
        }
    }
    let o = run(&["residuals", "1b", "--mu", "1", "--grid", "10x4"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "u,v,u,eq15,eq16");
}
