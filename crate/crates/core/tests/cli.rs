use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anisolab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn validate_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["map", "validate", "--builtin", "baker"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(dir.path(), "validation.json").contains("\"passed\": true"));

    let o = run(dir.path(), &["map", "validate", "--builtin", "sloppy_baker", "--param", "a=1/3", "--param", "b=1/7"]);
    assert_eq!(code(&o), 0);
    let cfg = read(dir.path(), "run.json");
    assert!(cfg.contains("\"a\": \"1/3\""), "{cfg}");
}

#[test]
fn singular_branch_exits_two_with_branch_index() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["map", "export", "--builtin", "baker"])), 0);
    let mut map: serde_json::Value = serde_json::from_str(&read(dir.path(), "map.json")).unwrap();
    map["branches"][1]["A"] = serde_json::json!([["1/1", "0/1"], ["2/1", "0/1"]]);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, map.to_string()).unwrap();
    let o = run(dir.path(), &["map", "validate", "--file", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("branch 1"));

    // unknown keys are a schema violation
    map["colour"] = serde_json::json!("red");
    std::fs::write(&bad, map.to_string()).unwrap();
    assert_eq!(code(&run(dir.path(), &["map", "validate", "--file", bad.to_str().unwrap()])), 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["map", "validate"])), 1);
    assert_eq!(code(&run(dir.path(), &["map", "validate", "--builtin", "nope"])), 1);
    assert_eq!(code(&run(dir.path(), &["map", "validate", "--file", "/nonexistent.json"])), 1);
    assert_eq!(code(&run(dir.path(), &["bound", "preset", "contracting_pair", "--p", "two"])), 1);
    assert_eq!(code(&run(dir.path(), &["complexity", "--builtin", "baker", "--n-max", "0"])), 1);
}

#[test]
fn export_roundtrip_gives_identical_validation() {
    for name in ["baker", "dissipative_baker", "sloppy_baker", "cat_squares", "contracting_pair"] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(code(&run(dir.path(), &["map", "export", "--builtin", name])), 0);
        assert_eq!(code(&run(dir.path(), &["map", "validate", "--builtin", name])), 0);
        let from_builtin = read(dir.path(), "validation.json");
        let file = dir.path().join("map.json");
        assert_eq!(code(&run(dir.path(), &["map", "validate", "--file", file.to_str().unwrap()])), 0);
        assert_eq!(read(dir.path(), "validation.json"), from_builtin, "{name}");
    }
}

#[test]
fn complexity_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["complexity", "--builtin", "baker", "--n-max", "8"]);
    assert_eq!(code(&o), 0);
    let csv = read(dir.path(), "complexity.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,D_b,D_e,J,root_b,root_e,bound_2nKd");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!((cols[1], cols[2]), ("2", "2"), "{r}");
    }
}

#[test]
fn bound_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["bound", "preset", "contracting_pair", "--p", "2", "--tminus", "-1/4"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("1.1892"));

    let o = run(dir.path(), &["bound", "optimize", "--builtin", "baker", "--variant", "both", "--weight", "transfer", "--n", "8"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&read(dir.path(), "bound_optimize.json")).unwrap();
    let value = r["value"].as_f64().unwrap();
    assert!(value <= 0.71 * 2f64.powf(0.125) + 1e-3, "{value}");
    for key in ["variant", "p", "t", "t_minus", "t_plus", "value", "margin"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }

    // p = 1/2 is never admissible, but the formula value is still reported
    let o = run(dir.path(), &["bound", "eval", "--builtin", "baker", "--p", "1/2", "--tplus", "1/2", "--tminus", "-1/2"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&read(dir.path(), "bound_eval.json")).unwrap();
    assert_eq!(r["admissible"], serde_json::json!(false));
    assert!(read(dir.path(), "bound_eval.csv").starts_with("n,B_n,argmax_code\n"));
}

#[test]
fn ulam_norm_and_ergostat_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&run(p, &["ulam", "run", "--builtin", "baker", "--N", "16", "--k", "3"])), 0);
    let spectrum = read(p, "ulam_spectrum.csv");
    let first: Vec<&str> = spectrum.lines().nth(1).unwrap().split(',').collect();
    assert!((first[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-10);
    assert!(read(p, "ulam_matrix.txt").starts_with("256 256 512\n"));

    assert_eq!(code(&run(p, &["norm", "probe-dirac", "--p", "2", "--t", "0.3", "--tminus", "-0.4"])), 0);
    let norms: Vec<f64> = read(p, "norm_dirac.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(norms.windows(2).all(|w| w[1] > w[0]));

    let args = ["ergostat", "corr", "--builtin", "baker", "--f", "cos2pix", "--n", "20", "--starts", "20", "--length", "2000", "--seed", "7"];
    assert_eq!(code(&run(p, &args)), 0);
    let first = (read(p, "corr.csv"), read(p, "corr.json"));
    assert_eq!(code(&run(p, &args)), 0);
    assert_eq!((read(p, "corr.csv"), read(p, "corr.json")), first, "re-running must give identical bytes");
    let r: serde_json::Value = serde_json::from_str(&first.1).unwrap();
    assert!(r["fit"]["status"].is_string());
}
