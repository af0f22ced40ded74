use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bdlattice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdlattice"))
        .args(args)
        .env_remove("BDLATTICE_PRECISION")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn empty_region_gives_header_only() {
    let o = bdlattice(&["generate", "--preset", "fibonacci", "--box", "3", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "gamma_0,gamma_1,y_0,y_1,w_0,w_1,piece,precision\n");
}

#[test]
fn golden_discrepancy_within_bound() {
    let o = bdlattice(&["discrepancy", "--preset", "brs-golden", "--horizon", "100000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["precision"], "exact");
    assert_eq!(v["within_bound"], true);
    let max = v["summary"]["max_abs"].as_f64().unwrap();
    assert!(max <= v["bound"]["count_bound"].as_f64().unwrap());
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "physical = [[1, 2]\n").unwrap();
    let bad = bad.to_str().unwrap();
    for args in [
        vec!["generate", "--scheme", bad, "--box", "0", "1"],
        vec!["generate", "--preset", "nonexistent", "--box", "0", "1"],
        vec!["generate", "--preset", "fibonacci"],
        vec!["discrepancy", "--instance", bad],
        vec!["bijection", "--setup", "/nonexistent/setup.toml", "--radius", "5"],
        vec!["--precision", "float:x", "generate", "--preset", "fibonacci", "--box", "0", "1"],
        vec!["brs-check", "--length", "-1"],
    ] {
        let o = bdlattice(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn degenerate_scheme_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("s.toml");
    std::fs::write(
        &f,
        "physical = [[1, 1]]\ninternal = [[2, 2]]\n[window]\ngenerators = [[1, 0]]\n",
    )
    .unwrap();
    let o = bdlattice(&["generate", "--scheme", f.to_str().unwrap(), "--box", "0", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn scheme_file_matches_preset() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("fib.toml");
    std::fs::write(
        &f,
        r#"physical = [["(1+sqrt(5))/2", 1]]
internal = [[-1, "(1+sqrt(5))/2"]]
generic = true
[window]
offset = ["1/3", "1/7"]
generators = [[1, 0], [0, 1]]
"#,
    )
    .unwrap();
    let a = bdlattice(&["generate", "--scheme", f.to_str().unwrap(), "--box", "-6", "6"]);
    let b = bdlattice(&["generate", "--preset", "fibonacci", "--box", "-6", "6"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn float_generate_agrees_with_exact() {
    let exact = bdlattice(&["generate", "--preset", "penrose", "--radius", "4"]);
    let float = bdlattice(&["--precision", "float:128", "generate", "--preset", "penrose", "--radius", "4"]);
    assert_eq!(float.status.code(), Some(0));
    let strip = |o: &Output| -> Vec<String> {
        stdout(o)
            .lines()
            .skip(1)
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert!(!strip(&exact).is_empty());
    assert_eq!(strip(&exact), strip(&float));
    let tag = stdout(&float).lines().nth(1).unwrap().rsplit_once(',').unwrap().1.to_string();
    assert!(tag.starts_with("float:128;min_margin="), "{tag}");
}

#[test]
fn float_precision_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_bdlattice"))
        .args(["generate", "--preset", "fibonacci", "--box", "0", "2", "--format", "json"])
        .env("BDLATTICE_PRECISION", "float:64")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["precision"].as_str().unwrap().starts_with("float:64"));
}

#[test]
fn singular_orbit_in_float_mode_exits_1() {
    // x = 0 puts n = 0 exactly on the interval endpoint.
    let o = bdlattice(&["--precision", "float:128", "discrepancy", "--preset", "brs-golden", "--horizon", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("precision exhausted"));
}

#[test]
fn bijection_presets_verify() {
    for preset in ["fibonacci", "fibonacci-n2"] {
        let o = bdlattice(&["bijection", "--preset", preset, "--radius", "300"]);
        assert_eq!(o.status.code(), Some(0), "{preset}");
        let v = json(&o);
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["injective"], true);
        assert_eq!(v["bound_ok"], true);
    }
}

#[test]
fn brs_check_verdicts() {
    let o = bdlattice(&["brs-check", "--length", "sqrt(5)-2", "--horizon", "20000"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["prediction"], "BRS");
    assert_eq!(v["k"], 2);
    assert_eq!(v["within_bound"], true);

    let o = bdlattice(&["brs-check", "--length", "1/2", "--horizon", "20000"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["prediction"], "NOT-FOUND");
}

#[test]
fn run_config_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "command = \"discrepancy\"\npreset = \"brs-sqrt2\"\nhorizon = 5000\noffsets = 2\n",
    )
    .unwrap();
    let a = bdlattice(&["run", "--config", cfg.to_str().unwrap()]);
    let b = bdlattice(&["discrepancy", "--preset", "brs-sqrt2", "--horizon", "5000", "--offsets", "2"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

fn penrose_run(dir: &Path, threads: &str) -> (Vec<u8>, Vec<u8>) {
    let patch = dir.join(format!("patch{threads}.csv"));
    let o = bdlattice(&[
        "--threads",
        threads,
        "penrose",
        "--radius",
        "12",
        "--samples",
        "300",
        "--regions",
        "4",
        "--max-region",
        "60",
        "--seed",
        "7",
        "--patch",
        patch.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    (o.stdout, std::fs::read(patch).unwrap())
}

#[test]
fn penrose_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (r1, p1) = penrose_run(dir.path(), "1");
    let (r2, p2) = penrose_run(dir.path(), "3");
    assert_eq!(r1, r2);
    assert_eq!(p1, p2);
    let v: Value = serde_json::from_slice(&r1).unwrap();
    assert_eq!(v["pieces"], 10);
    assert_eq!(v["passed"], true);
    assert!(String::from_utf8(p1).unwrap().starts_with("u_0,u_1,piece,precision\n"));
}

#[test]
fn generate_is_deterministic() {
    let a = bdlattice(&["--threads", "1", "generate", "--preset", "penrose", "--radius", "6", "--format", "json"]);
    let b = bdlattice(&["--threads", "2", "generate", "--preset", "penrose", "--radius", "6", "--format", "json"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
