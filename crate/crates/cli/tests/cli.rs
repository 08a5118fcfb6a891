use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn sigwind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigwind"))
        .args(args)
        .env_remove("SIGWIND_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sigwind-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> PathBuf {
    let p = scratch(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn lyndon_list_degree_four() {
    let out = sigwind(&["lyndon", "list", "--d", "2", "--N", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    let words: Vec<&str> = v["words"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    assert_eq!(words, ["1", "1112", "112", "1122", "12", "122", "1222", "2"]);
}

#[test]
fn sharpness_reports_computed_coefficients() {
    let out = sigwind(&["verify", "sharpness"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["word"], "12121");
    assert_eq!(v["gamma"].as_f64(), Some(2.0));
    assert_eq!(v["gamma_tilde"].as_f64(), Some(-2.0));
    assert_eq!(v["moment_tables_max_abs_difference"].as_f64(), Some(0.0));
}

#[test]
fn empty_csv_is_a_parse_error() {
    let p = write("empty.csv", "");
    let out = sigwind(&["sig", "compute", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row"));
}

#[test]
fn malformed_row_is_named() {
    let p = write("bad.csv", "x,y\n0,0\n1,zz\n");
    let out = sigwind(&["sig", "compute", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(sigwind(&["lyndon", "list", "--bogus"]).status.code(), Some(2));
    assert_eq!(sigwind(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn signature_and_moments_of_a_square() {
    let p = write("square.csv", "x,y\n0,0\n1,0\n1,1\n0,1\n0,0\n");
    let out = sigwind(&["sig", "compute", "--input", p.to_str().unwrap(), "--N", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["signature"]["coeffs"]["12"].as_f64(), Some(1.0));
    assert_eq!(v["log_signature"]["12"].as_f64(), Some(1.0));
    let out = sigwind(&["winding", "moments", "--input", p.to_str().unwrap(), "--N", "3"]);
    let v = json(&out);
    let first = &v["moments"]["values"][0];
    assert_eq!((first["n"].as_u64(), first["k"].as_u64()), (Some(0), Some(0)));
    assert!((first["value"].as_f64().unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn open_path_has_no_moments() {
    let p = write("open.csv", "x,y\n0,0\n1,0\n1,1\n");
    let out = sigwind(&["winding", "moments", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verification_commands_pass() {
    for args in [
        &["verify", "theorem1", "--count", "20"][..],
        &["verify", "corollary2", "--count", "20"],
        &["verify", "isoperimetric", "--count", "10", "--resolution", "500"],
        &["verify", "semicircle", "--m", "1000", "--tol", "1e-6"],
    ] {
        let out = sigwind(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(json(&out)["passed"], true);
    }
}

#[test]
fn failed_verification_exits_one_with_table() {
    let out = sigwind(&["verify", "semicircle", "--m", "100", "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["errors"].as_array().unwrap().len(), 3);
}

#[test]
fn theorem6_display_table() {
    let out = sigwind(&["verify", "theorem6", "--A", "0.16"]);
    // The printed [e1,e2]⊗[e1,e2] coefficient differs from the assembly.
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert!(v["display"]["free_moment_sensitivity"].as_f64().unwrap() < 1e-12);
    let gap = std::f64::consts::PI.powi(2) / 64.0;
    assert!((v["display"]["max_abs_difference"].as_f64().unwrap() - gap).abs() < 1e-12);
}

#[test]
fn special_functions() {
    let v = json(&sigwind(&["specfun", "catalan"]));
    assert!((v["value"].as_f64().unwrap() - 0.915_965_594_177_219).abs() < 1e-15);
    let v = json(&sigwind(&["specfun", "G", "--sigma", "1"]));
    assert_eq!(v["value"].as_f64(), Some(0.0));
    assert_eq!(sigwind(&["specfun", "G", "--sigma", "-1"]).status.code(), Some(2));
    let out = sigwind(&["specfun", "A", "--tol", "1e-2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.1613).abs() < 1e-3);
    assert!(v["wall_time"].is_number());
}

#[test]
fn sle_sample_is_reproducible_csv() {
    let args = ["sle", "sample", "--kappa", "2.6667", "--steps", "200", "--T", "4", "--seed", "7"];
    let a = sigwind(&args);
    let b = sigwind(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y"));
    assert_eq!(lines.next(), Some("0,0"));
    assert_eq!(text.lines().count(), 202);
    let looped = sigwind(&["sle", "sample", "--steps", "50", "--stage", "loop", "--arc-points", "8"]);
    let text = String::from_utf8(looped.stdout).unwrap();
    assert_eq!(text.lines().last(), Some("0,0"));
    assert_eq!(sigwind(&["sle", "sample", "--kappa", "6"]).status.code(), Some(2));
}

#[test]
fn monte_carlo_pipeline_with_manifest() {
    let est = scratch("estimate.json");
    let manifest = scratch("manifest.json");
    let args = [
        "sle", "mc", "--samples", "8", "--steps", "400", "--seed", "3", "--arc-points", "64",
    ];
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", est.to_str().unwrap(), "--manifest", manifest.to_str().unwrap()]);
    let out = sigwind(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(&est).unwrap();
    let m: Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["schema"], 1);
    assert_eq!(m["seed"], 3);
    assert_eq!(m["output_sha256"].as_str().unwrap().len(), 64);

    let mut threaded = full.clone();
    threaded.extend(["--threads", "2"]);
    assert_eq!(sigwind(&threaded).status.code(), Some(0));
    assert_eq!(std::fs::read(&est).unwrap(), first);
    let m2: Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["output_sha256"], m2["output_sha256"]);

    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["estimate"]["samples_used"], 8);

    let out = sigwind(&["verify", "theorem6", "--A", "0.1613", "--estimate", est.to_str().unwrap()]);
    let v = json(&out);
    let mc = &v["monte_carlo"];
    assert_eq!(mc["samples"], 8);
    assert!(!mc["routes"].as_array().unwrap().is_empty());
    assert!(!mc["loop_comparison"]["words"].as_array().unwrap().is_empty());
    assert!(mc["two_point"]["two_point"]["estimate"].is_number());
}

#[test]
fn threads_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_sigwind"))
        .args(["specfun", "catalan"])
        .env("SIGWIND_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
