use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn su2pdo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_su2pdo")).args(args).output().expect("spawn su2pdo")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn entry(v: &Value, i: usize, j: usize) -> (f64, f64) {
    (v["re"][i][j].as_f64().unwrap(), v["im"][i][j].as_f64().unwrap())
}

#[test]
fn d0_symbol_matches_golden_file() {
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/d0_symbol_x2_4.json")).unwrap();
    let a = su2pdo(&["symbol", "D0", "--band-limit-x2", "4", "--deterministic"]);
    let b = su2pdo(&["symbol", "D0", "--band-limit-x2", "4", "--deterministic"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout.clone()).unwrap(), golden);

    // the golden content itself: σ_D0(ξ) = diag(n), n = −ξ..ξ
    let v: Value = serde_json::from_str(&golden).unwrap();
    assert_eq!(v["layout"], "invariant");
    assert!(v["grid"].is_null());
    for blk in v["blocks"].as_array().unwrap() {
        let l2 = blk["l_x2"].as_u64().unwrap() as usize;
        for i in 0..=l2 {
            for j in 0..=l2 {
                let want = if i == j { i as f64 - l2 as f64 / 2.0 } else { 0.0 };
                assert_eq!(entry(blk, i, j), (want, 0.0));
            }
        }
    }
}

#[test]
fn print_config_lists_defaults() {
    let v = json_of(&su2pdo(&["--print-config"]));
    assert_eq!(v["band_limit_x2"], 8);
    assert_eq!(v["order"], 2);
}

#[test]
fn exit_codes() {
    assert_eq!(su2pdo(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(su2pdo(&["symbol", "D+ + Foo"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    fs::write(&g, r#"{"band_limit_x2":0,"blocks":[{"l_x2":0,"re":[[1.0]],"im":[[0.0]]}]}"#).unwrap();
    // the Laplacian is singular at ξ = 0
    let out = su2pdo(&["solve", "Lap", g.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn parse_error_names_known_identifiers() {
    let out = su2pdo(&["symbol", "D+ + Foo"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Lap") && err.contains("q0"), "{err}");
}

#[test]
fn check_difference_identities_passes() {
    let out = su2pdo(&["check", "difference-identities"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["passed"], true);
    for c in v["suites"][0]["checks"].as_array().unwrap() {
        if c["informational"] == false {
            assert!(c["error"].as_f64().unwrap() < 1e-9);
        }
    }
}

#[test]
fn check_unknown_suite_is_usage_error() {
    assert_eq!(su2pdo(&["check", "bogus"]).status.code(), Some(2));
}

#[test]
fn solve_exact_divides_by_one_plus_xi_xi_plus_one() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let f = dir.path().join("f.json");
    // ĝ(1) = E₀₀
    fs::write(
        &g,
        r#"{"band_limit_x2":2,"blocks":[
            {"l_x2":0,"re":[[0.0]],"im":[[0.0]]},
            {"l_x2":1,"re":[[0.0,0.0],[0.0,0.0]],"im":[[0.0,0.0],[0.0,0.0]]},
            {"l_x2":2,"re":[[1.0,0.0,0.0],[0.0,0.0,0.0],[0.0,0.0,0.0]],"im":[[0.0,0.0,0.0],[0.0,0.0,0.0],[0.0,0.0,0.0]]}]}"#,
    )
    .unwrap();
    let out = su2pdo(&["solve", "I - Lap", g.to_str().unwrap(), "-o", f.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&f).unwrap()).unwrap();
    let (re, im) = entry(&v["blocks"][2], 0, 0);
    assert!((re - 1.0 / 3.0).abs() < 1e-14 && im == 0.0);

    let out = su2pdo(&["solve", "I", g.to_str().unwrap()]);
    let v = json_of(&out);
    assert_eq!(entry(&v["blocks"][2], 0, 0), (1.0, 0.0));
}

#[test]
fn synthesize_then_analyze_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    let gf = dir.path().join("gf.json");
    let back = dir.path().join("back.json");
    fs::write(
        &c,
        r#"{"band_limit_x2":1,"blocks":[
            {"l_x2":0,"re":[[0.25]],"im":[[-1.0]]},
            {"l_x2":1,"re":[[0.5,0.0],[0.0,-0.75]],"im":[[0.0,0.125],[2.0,0.0]]}]}"#,
    )
    .unwrap();
    assert!(su2pdo(&["synthesize", c.to_str().unwrap(), "-o", gf.to_str().unwrap()]).status.success());
    let out = su2pdo(&["analyze", gf.to_str().unwrap(), "--band-limit-x2", "1", "-o", back.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a: Value = serde_json::from_str(&fs::read_to_string(&c).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&fs::read_to_string(&back).unwrap()).unwrap();
    for (x, y) in a["blocks"].as_array().unwrap().iter().zip(b["blocks"].as_array().unwrap()) {
        let d = x["l_x2"].as_u64().unwrap() as usize + 1;
        for i in 0..d {
            for j in 0..d {
                let (p, q) = (entry(x, i, j), entry(y, i, j));
                assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn diff_of_laplacian_file() {
    let dir = tempfile::tempdir().unwrap();
    let lap = dir.path().join("lap.json");
    assert!(su2pdo(&["symbol", "Lap", "--band-limit-x2", "6", "-o", lap.to_str().unwrap()]).status.success());
    // Δ₊σ_Δ = −σ_{D−}: at ξ = 1/2, σ_{D−} has the single entry −1 at (0, 1)
    let v = json_of(&su2pdo(&["diff", lap.to_str().unwrap(), "--alpha", "1,0,0"]));
    let blk = &v["blocks"][1];
    let (re, im) = entry(blk, 0, 1);
    assert!((re - 1.0).abs() < 1e-12 && im.abs() < 1e-12);
}

#[test]
fn compose_and_adjoint_run() {
    let v = json_of(&su2pdo(&["compose", "D+", "q0", "--band-limit-x2", "4", "-N", "1"]));
    assert_eq!(v["layout"], "varying");
    let v = json_of(&su2pdo(&["adjoint", "D0", "--band-limit-x2", "4"]));
    assert_eq!(v["layout"], "invariant");
    let v = json_of(&su2pdo(&["parametrix", "I - Lap", "--band-limit-x2", "4"]));
    let (re, _) = entry(&v["blocks"][2], 0, 0);
    assert!((re - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn grid_reports_gram_error() {
    let v = json_of(&su2pdo(&["grid"]));
    assert!(v["gram_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["grid"]["n_theta"], 18);
}
