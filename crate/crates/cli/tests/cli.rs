use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sostest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sostest")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SQUARE: &str = r#"{"n":1,"basis":"monomial","terms":[
  {"vars":[[1,2]],"coeff":1.0},{"vars":[[1,1]],"coeff":-2.0},{"vars":[],"coeff":1.0}]}"#;

const MOTZKIN: &str = r#"{"n":2,"basis":"monomial","terms":[
  {"vars":[[1,4],[2,2]],"coeff":1.0},{"vars":[[1,2],[2,4]],"coeff":1.0},
  {"vars":[[1,2],[2,2]],"coeff":-3.0},{"vars":[],"coeff":1.0}]}"#;

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn sweep_rows_and_determinism() {
    let args = ["interp-sweep", "--n", "16,24", "--seeds", "3", "--seed", "4"];
    let a = sostest(&args);
    assert_eq!(a.status.code(), Some(0));
    let b = sostest(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let lines = data_lines(&text);
    assert_eq!(lines[0], "seed,n,m,d,C,M_dev,H_norm,g_norm,gsq_norm,residual");
    assert_eq!(lines.len(), 1 + 6);
    // sorted by (n, m, seed)
    assert!(lines[1].starts_with("4,16,9,2,152,"));
    assert!(lines[3].starts_with("6,16,9,2,"));
    assert!(lines[4].starts_with("4,24,12,2,324,"));
    assert!(text.contains("# seed=4\n"));
}

#[test]
fn sweep_empty_grid_is_header_only() {
    let o = sostest(&["interp-sweep", "--n", "8", "--m", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(data_lines(&stdout(&o)), vec!["seed,n,m,d,C,M_dev,H_norm,g_norm,gsq_norm,residual"]);
}

#[test]
fn sweep_json_and_gsq() {
    let o = sostest(&[
        "interp-sweep",
        "--n",
        "6",
        "--m",
        "3",
        "--seeds",
        "2",
        "--values",
        "ones",
        "--gsq",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r["gsq_norm"].as_f64().unwrap() > 0.0);
        assert_eq!(r["C"].as_f64().unwrap(), 27.0);
    }
    assert_eq!(v["effective"]["values"], "ones");
}

#[test]
fn sweep_beyond_capacity_is_numerical_failure() {
    let o = sostest(&["interp-sweep", "--n", "2", "--d", "1", "--m", "5", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("0,2,5,1,2,NaN"));
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "seed = 5\ntol_psd = 1e-9\n[interp_sweep]\nn = [10]\nseeds = 1\n");
    let cfg = cfg.to_str().unwrap();
    let from_config = stdout(&sostest(&["interp-sweep", "--config", cfg]));
    assert!(from_config.contains("# seed=5\n"));
    assert!(from_config.contains("# tol_psd=1e-9\n"));
    assert!(from_config.contains("# n=10\n"));
    assert_eq!(data_lines(&from_config).len(), 2);
    let flagged = stdout(&sostest(&["interp-sweep", "--config", cfg, "--seed", "6", "--n", "12"]));
    assert!(flagged.contains("# seed=6\n"));
    assert!(flagged.contains("# n=12\n"));
    assert!(data_lines(&flagged)[1].starts_with("6,12,"));

    let bad = write(dir.path(), "bad.toml", "sed = 5\n");
    assert_eq!(sostest(&["interp-sweep", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let o = sostest(&["interp-sweep", "--n", "8", "--seeds", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(data_lines(&std::fs::read_to_string(&out).unwrap()).len(), 3);

    let missing = dir.path().join("no/such/dir/rows.csv");
    let o = sostest(&["interp-sweep", "--n", "8", "--out", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors() {
    assert_eq!(sostest(&[]).status.code(), Some(2));
    assert_eq!(sostest(&["interp-sweep", "--seed", "x"]).status.code(), Some(2));
    assert_eq!(sostest(&["certify", "motzkin", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(sostest(&["sos-check", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn sos_check_square_has_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "sq.json", SQUARE);
    let o = sostest(&["sos-check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["verdict"], "YES");
    let squares = v["decomposition"].as_array().unwrap();
    assert_eq!(squares.len(), 1);
    let mut coeffs: Vec<f64> =
        squares[0]["terms"].as_array().unwrap().iter().map(|t| t["coeff"].as_f64().unwrap()).collect();
    coeffs.sort_by(f64::total_cmp);
    // ±(x - 1)
    assert!((coeffs[0].abs() - 1.0).abs() < 1e-6 && (coeffs[1].abs() - 1.0).abs() < 1e-6);
    assert!(coeffs[0] * coeffs[1] < 0.0);
}

#[test]
fn sos_check_motzkin_is_no() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "mz.json", MOTZKIN);
    let o = sostest(&["sos-check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["verdict"], "NO");
    assert_eq!(v["effective"]["half_degree"], 3);
    assert!(v["report"]["violations"]["eval"].as_f64().unwrap() > 1e-6);
}

#[test]
fn sos_check_sample_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", r#"{"n":2,"half_degree":1,"samples":[]}"#);
    assert_eq!(sostest(&["sos-check", empty.to_str().unwrap()]).status.code(), Some(2));
    let blank = write(dir.path(), "blank.json", "");
    assert_eq!(sostest(&["sos-check", blank.to_str().unwrap()]).status.code(), Some(2));

    let good = write(
        dir.path(),
        "s.json",
        r#"{"n":2,"half_degree":1,"samples":[{"point":[0.5,-1.0],"value":0.04},{"point":[1.5,0.2],"value":0.09}]}"#,
    );
    let o = sostest(&["sos-check", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(json(&o)["verdict"], "YES");

    let neg = write(dir.path(), "n.json", r#"{"n":1,"half_degree":1,"samples":[{"point":[0.5],"value":-0.1}]}"#);
    let o = sostest(&["sos-check", neg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["witness_point"][0], 0.5);
}

#[test]
fn certify_motzkin_families() {
    let o = sostest(&["certify", "motzkin-block"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["pe_value"], "-3");
    assert_eq!(v["certified"], true);
    assert_eq!(v["distance"]["squared_distance_exact"], "45/230623");

    // explicit graded moments: value is exact but the matrix is not PSD
    let o = sostest(&["certify", "motzkin", "--r", "2", "--c", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["pe_value"], "-3");
    assert_eq!(v["effective"]["k"], "2^(1/2)");
    assert_eq!(v["effective"]["nu"], 52);
    assert_eq!(v["psd"]["pass"], false);
    assert!(v["distance"]["distance_log2"].is_number());

    assert_eq!(sostest(&["certify", "motzkin", "--r", "3"]).status.code(), Some(2));
    assert_eq!(sostest(&["certify", "motzkin-block", "--r", "4"]).status.code(), Some(2));
    assert_eq!(sostest(&["certify", "motzkin", "--c", "abc"]).status.code(), Some(2));
}

#[test]
fn certify_xor() {
    let o = sostest(&["certify", "xor", "--n", "16", "--m", "40", "--seed", "1"]);
    let v = json(&o);
    match o.status.code() {
        Some(1) if v.get("contradiction").is_some() => {
            assert!(v["notice"].as_str().unwrap().starts_with("Contradiction"));
        }
        Some(0) => assert_eq!(v["pe_value"], "-40"),
        other => panic!("unexpected exit {other:?}: {v}"),
    }

    let dir = tempfile::tempdir().unwrap();
    let eq = write(
        dir.path(),
        "eq.json",
        r#"[{"vars":[1,2,3,4],"sign":1},{"vars":[1,2,5,6],"sign":1},{"vars":[3,4,5,6],"sign":-1}]"#,
    );
    let o = sostest(&["certify", "xor", "--n", "6", "--equations", eq.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json(&o)["contradiction"]["set"].is_array());

    // a consistent pair closes and is certified
    let ok = write(dir.path(), "ok.json", r#"[{"vars":[1,2,3,4],"sign":1},{"vars":[3,4,5,6],"sign":-1}]"#);
    let o = sostest(&["certify", "xor", "--n", "6", "--equations", ok.to_str().unwrap()]);
    let v = json(&o);
    assert_eq!(v["pe_value"], "-2");
    assert_eq!(o.status.code(), Some(if v["certified"] == true { 0 } else { 1 }));
}

#[test]
fn lowerbound_demo_runs() {
    let o = sostest(&["lowerbound-demo", "--n", "10", "--r", "2", "--c", "1", "--m", "8", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["far"], true);
    assert_eq!(v["tester"], "YES");
    assert_eq!(v["regime"], "inside");

    let o = sostest(&["lowerbound-demo", "--m", "8008", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["regime"], "outside-lower-bound-regime");
}

#[test]
fn nonneg_test_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let sq = write(dir.path(), "x2.json", r#"{"n":2,"basis":"monomial","terms":[{"vars":[[1,2]],"coeff":1.0}]}"#);
    let o = sostest(&["nonneg-test", sq.to_str().unwrap(), "--epsilon", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["verdict"], "YES");

    let neg = write(dir.path(), "mx.json", r#"{"n":1,"basis":"hermite","terms":[{"vars":[[1,1]],"coeff":-1.0}]}"#);
    let o = sostest(&["nonneg-test", neg.to_str().unwrap(), "--epsilon", "0.5", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["verdict"], "NO");
    assert!(v["witness_point"][0].as_f64().unwrap() > 0.0);

    let bad = write(dir.path(), "bad.json", r#"{"n":1,"basis":"monomial","terms":[{"vars":[[1,1]]}]}"#);
    assert_eq!(sostest(&["nonneg-test", bad.to_str().unwrap()]).status.code(), Some(2));
    let bad_basis = write(dir.path(), "bb.json", r#"{"n":1,"basis":"chebyshev","terms":[]}"#);
    assert_eq!(sostest(&["nonneg-test", bad_basis.to_str().unwrap()]).status.code(), Some(2));
}
