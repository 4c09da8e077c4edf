use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn convlab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_convlab"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("CONVLAB_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(doc: &Value) {
    let v = schema();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn without_run(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("run");
    v
}

#[test]
fn unknown_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"model": {"name": "sphereX"}}"#);
    let out = convlab(&["analyze", "--config", &cfg, "--out", "r.json"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sphereX"));
}

#[test]
fn bad_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(convlab(&["analyze", "--config", missing.to_str().unwrap(), "--out", out], None).status.code(), Some(2));
    for text in [
        "{",
        r#"{"model": {"name": "sphere"}, "bound": 0}"#,
        r#"{"model": {"name": "sphere", "params": {"R": -1}}}"#,
        r#"{"model": {"name": "euclidean"}, "typo": 1}"#,
    ] {
        let cfg = write(dir.path(), "c.json", text);
        let o = convlab(&["analyze", "--config", &cfg, "--out", out], None);
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
    let o = convlab(&["cutlocus", "--model", "flat_torus", "--point", "0.1", "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"name": "euclidean"}, "points": {"random": 2}, "seed": 7,
            "budgets": {"n_dirs": 8, "n_pairs": 6}, "conditions": ["A", "B"], "balls": [1.0], "cut_directions": 2}"#,
    );
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (path, threads) in [(&a, None), (&b, Some("1"))] {
        let o = convlab(&["analyze", "--config", &cfg, "--out", path.to_str().unwrap()], threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(serde_json::to_string(&without_run(&ta)).unwrap(), serde_json::to_string(&without_run(&tb)).unwrap());
    let doc: Value = serde_json::from_str(&ta).unwrap();
    assert_valid(&doc);
    assert_eq!(doc["points"].as_array().unwrap().len(), 2);
    assert_eq!(doc["berger"]["unbounded"], true);

    let c = dir.path().join("c.json.out");
    let o = convlab(&["analyze", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "8"], None);
    assert!(o.status.success());
    let tc = std::fs::read_to_string(&c).unwrap();
    assert_ne!(without_run(&ta)["points"], without_run(&tc)["points"]);
}

#[test]
fn torus_grid_csv_rows_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("torus.csv");
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"model": {{"name": "flat_torus"}}, "points": {{"grid": {{"lo": [0, 0], "hi": [1, 1], "n": [5, 5]}}}},
                "budgets": {{"n_dirs": 16, "n_pairs": 6, "radius_tol": 4e-3}},
                "outputs": [{{"path": {:?}, "format": "csv"}}]}}"#,
            out.to_str().unwrap()
        ),
    );
    let o = convlab(&["analyze", "--config", &cfg], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    for col in ["x1", "x2", "i", "i_hw", "lc", "lc_hw", "slc", "slc_hw", "c", "c_hw", "sc", "sc_hw"] {
        assert!(header.iter().any(|h| h == col), "missing {col}");
    }
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 25);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for (name, truth) in [("i", 0.5), ("lc", 0.5), ("slc", 0.5), ("c", 0.25), ("sc", 0.25)] {
        let vals: Vec<f64> = rows.iter().map(|r| r[col(name)].parse().unwrap()).collect();
        let hw: Vec<f64> = rows.iter().map(|r| r[col(&format!("{name}_hw"))].parse().unwrap()).collect();
        for (v, h) in vals.iter().zip(&hw) {
            assert!((v - truth).abs() <= h + 0.01, "{name} = {v} ± {h}");
        }
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 0.02, "{name} spread {spread}");
    }
}

#[test]
fn cutlocus_writes_one_row_per_direction() {
    let dir = tempfile::tempdir().unwrap();
    let csv_out = dir.path().join("cuts.csv");
    let o = convlab(
        &["cutlocus", "--model", "flat_torus", "--point", "0.2,0.3", "--dirs", "8", "--out", csv_out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(&csv_out).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8);
    // direction 0 is the first coordinate axis
    assert_eq!(&rows[0][3], "found");
    assert!((rows[0][4].parse::<f64>().unwrap() - 0.5).abs() < 1e-4);

    let json_out = dir.path().join("cuts.json");
    let o = convlab(
        &["cutlocus", "--model", "hyperbolic_halfplane", "--point", "0,1", "--dirs", "3", "--out", json_out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    assert_valid(&doc);
    for c in doc["cut_locus"]["cuts"].as_array().unwrap() {
        assert_eq!(c["status"], "exceeds_bound");
    }
}

#[test]
fn check_theorems_on_euclidean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite.json");
    let o = convlab(&["check-theorems", "--model", "euclidean", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with('[')).count(), 11);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_valid(&doc);
    let suite = &doc["suite"];
    assert_eq!(suite["all_passed"], true, "{stdout}");
    let row = &suite["rows"][0];
    assert_eq!(row["i"], "exceeds_bound(10)");
    assert_eq!(row["lc"], "exceeds_bound(10)");
    assert_eq!(row["condition_b"], "holds_up_to_bound");
}
