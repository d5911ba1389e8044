use std::path::PathBuf;
use std::process::Command;

use fellkms_cli::{run, EXIT_FAIL, EXIT_INPUT, EXIT_PASS};

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name]
        .iter()
        .collect();
    p.display().to_string()
}

fn fellkms(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fellkms").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json_of(args: &[&str]) -> (i32, serde_json::Value) {
    let mut a = args.to_vec();
    a.push("--json");
    let (code, out, err) = fellkms(&a);
    assert!(err.is_empty(), "{err}");
    (code, serde_json::from_str(&out).unwrap())
}

#[test]
fn validate_exit_codes() {
    assert_eq!(
        fellkms(&["validate", &scenario("p2_tables.json")]).0,
        EXIT_PASS
    );
    let (code, out, _) = fellkms(&["validate", &scenario("corrupted_inverse.json")]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.contains("inverse") && out.contains("ab"), "{out}");
    let (code, _, err) = fellkms(&["validate", &scenario("missing_fiber.json")]);
    assert_eq!(code, EXIT_INPUT);
    assert!(
        err.contains("bundle.fibers") && err.contains("(2,*,1)"),
        "{err}"
    );
}

#[test]
fn malformed_input_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"groupoid\": {\"cyclic\": 2},\n  \"bundle\": \n}",
    )
    .unwrap();
    let (code, _, err) = fellkms(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("line 4"), "{err}");

    std::fs::write(
        &bad,
        r#"{"groupoid": {"cyclic": 2}, "bundle": {"kind": "trivial", "algebra": "full:0"}}"#,
    )
    .unwrap();
    let (code, _, err) = fellkms(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("bundle.algebra"), "{err}");

    let (code, _, _) = fellkms(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(code, EXIT_INPUT);
    let (code, _, _) = fellkms(&["frobnicate", &scenario("p2_tables.json")]);
    assert_eq!(code, EXIT_INPUT);
}

#[test]
fn check_kms_gibbs_and_mismatch() {
    let (code, v) = json_of(&["check-kms", &scenario("p2_gibbs_state.json")]);
    assert_eq!(code, EXIT_PASS);
    let r = &v["results"][0];
    assert_eq!(r["certificate"]["pass"], true);
    assert_eq!(r["mu"]["(1,*)"], serde_json::json!(0.666666666667));

    let (code, v) = json_of(&["check-kms", &scenario("p2_gibbs_state.json"), "--beta", "1"]);
    assert_eq!(code, EXIT_FAIL);
    let res = v["results"][0]["certificate"]["kms"]["max_residual"]
        .as_f64()
        .unwrap();
    assert!(res > 0.1, "{res}");
}

#[test]
fn check_kms_trace_and_positivity() {
    let (code, v) = json_of(&["check-kms", &scenario("p2_trace.json")]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(v["results"][0]["trace"], true);

    let (code, out, _) = fellkms(&["check-kms", &scenario("not_positive.json")]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.contains("min eigenvalue -5.000000e-1"), "{out}");
}

#[test]
fn check_kms_without_state_is_input_error() {
    assert_eq!(
        fellkms(&["check-kms", &scenario("p2_gibbs.json")]).0,
        EXIT_INPUT
    );
    assert_eq!(
        fellkms(&["solve", &scenario("missing_fiber.json")]).0,
        EXIT_INPUT
    );
}

#[test]
fn morita_bundle_conditions_fail_while_state_is_kms() {
    let (code, v) = json_of(&["check-kms", &scenario("morita.json")]);
    assert_eq!(code, EXIT_FAIL);
    let cert = &v["results"][0]["certificate"];
    assert_eq!(cert["kms"]["holds"], true);
    assert_eq!(cert["condition_i"]["holds"], false);
    assert_eq!(cert["condition_ii"]["holds"], false);
}

#[test]
fn solve_examples() {
    let (code, v) = json_of(&["solve", &scenario("p2_gibbs.json")]);
    assert_eq!(code, EXIT_PASS);
    let c = &v["results"][0]["candidates"];
    assert_eq!(c.as_array().unwrap().len(), 1);
    assert_eq!(c[0]["mu"]["(2,*)"], serde_json::json!(0.333333333333));

    let (code, v) = json_of(&["solve", &scenario("z2_obstruction.json")]);
    assert_eq!(code, EXIT_PASS);
    assert!(v["results"][0]["candidates"].as_array().unwrap().is_empty());
    assert!(v["results"][0]["diagnosis"][0]
        .as_str()
        .unwrap()
        .contains("cycle obstruction"));

    // the sweep traces ν_β(a) = 1/(1+e^β)
    let (_, v) = json_of(&[
        "solve",
        &scenario("p2_tables.json"),
        "--beta-range",
        "0",
        "2",
        "3",
    ]);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    for r in results {
        let beta = r["beta"].as_f64().unwrap();
        let a = r["candidates"][0]["mu"]["a"].as_f64().unwrap();
        assert!((a - 1.0 / (1.0 + beta.exp())).abs() < 1e-11);
    }
}

#[test]
fn gspace_double_disintegration() {
    let (code, v) = json_of(&["check-kms", &scenario("swap_gspace.json")]);
    assert_eq!(code, EXIT_PASS);
    let gs = &v["results"][0]["gspace"];
    assert_eq!(gs["mu"]["*"], serde_json::json!(1.0));
    assert_eq!(gs["nu"]["q"], serde_json::json!(0.666666666667));
}

#[test]
fn roundtrip_state_and_pair() {
    let (code, v) = json_of(&["roundtrip", &scenario("z2_m2_pair.json")]);
    assert_eq!(code, EXIT_PASS);
    assert!(v["state"]["deviation"].as_f64().unwrap() < 1e-12);
    assert!(v["pair"]["field_deviation"].as_f64().unwrap() < 1e-12);
    assert_eq!(
        fellkms(&["roundtrip", &scenario("p2_gibbs.json")]).0,
        EXIT_INPUT
    );
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("solve", "p2_tables.json"),
        ("check-kms", "swap_gspace.json"),
        ("validate", "corrupted_inverse.json"),
    ] {
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        fellkms(&[cmd, &scenario(file), "--out", a.to_str().unwrap()]);
        fellkms(&[cmd, &scenario(file), "--out", b.to_str().unwrap()]);
        let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        assert!(!a.is_empty());
        assert_eq!(a, b, "{cmd} {file}");
    }
}

#[test]
fn tolerance_from_environment() {
    let bin = env!("CARGO_BIN_EXE_fellkms");
    let f = scenario("p2_gibbs_state.json");
    // β slightly off: fails at the default tolerance, passes at a loose one
    let off = "0.69315";
    let strict = Command::new(bin)
        .args(["check-kms", &f, "--beta", off])
        .env_remove("FELLKMS_TOL")
        .output()
        .unwrap()
        .status;
    assert_eq!(strict.code(), Some(EXIT_FAIL));
    let loose = Command::new(bin)
        .args(["check-kms", &f, "--beta", off])
        .env("FELLKMS_TOL", "1e-3")
        .output()
        .unwrap()
        .status;
    assert_eq!(loose.code(), Some(EXIT_PASS));
    let flag = Command::new(bin)
        .args(["check-kms", &f, "--beta", off, "--tol", "1e-9"])
        .env("FELLKMS_TOL", "1e-3")
        .output()
        .unwrap()
        .status;
    assert_eq!(flag.code(), Some(EXIT_FAIL));
    let bad = Command::new(bin)
        .args(["validate", &f])
        .env("FELLKMS_TOL", "nope")
        .output()
        .unwrap()
        .status;
    assert_eq!(bad.code(), Some(EXIT_INPUT));
}
