use std::path::Path;
use std::process::{Command, Output};

fn skewlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewlab"))
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = skewlab(dir.path(), &["constants", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_config_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schema_version = 1\n[run]\nsamplez = 10\n").unwrap();
    let out = skewlab(dir.path(), &["--config", cfg.to_str().unwrap(), "constants"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("samplez"));

    let out = skewlab(dir.path(), &["lemmas", "--beta", "0.7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.beta"));

    let out = skewlab(dir.path(), &["selftest", "--only", "13"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn correlations_table_has_one_row_per_lag_and_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = skewlab(dir.path(), &["--samples", "2000", "--out", "res", "correlations", "--k", "16,32,64,128"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("res/correlations.csv"));
    assert_eq!(rows.len(), 4);
    let fit = header.iter().position(|c| c == "fit_exponent").expect("fit_exponent column");
    let ks: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ks, ["16", "32", "64", "128"]);
    assert!(rows[0][fit].parse::<f64>().unwrap().is_finite());
}

#[test]
fn constants_report_base_variance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "schema_version = 1\n[run]\nsigma2_samples = 500\n").unwrap();
    let out = skewlab(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "--samples", "2000", "--out", "res", "--format", "json", "constants", "--bmax", "6", "--step", "0.5"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/constants.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let get = |q: &str| rows.iter().find(|r| r["quantity"] == q).unwrap_or_else(|| panic!("row {q}"));
    assert!((get("sigma2_exact")["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let mc = get("sigma2_monte_carlo");
    let (val, se) = (mc["value"].as_f64().unwrap(), mc["stderr"].as_f64().unwrap());
    assert!((val - 0.5).abs() < 4.0 * se + 0.02, "{val} +- {se}");
    assert!(get("big_sigma2")["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn rerun_from_written_config_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = skewlab(dir.path(), &["--samples", "500", "--seed", "7", "--out", "a", "correlations", "--k", "16,32"]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/correlations.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "correlations");

    let out = skewlab(dir.path(), &["--config", "a/correlations.config.toml", "--out", "b", "correlations"]);
    assert!(out.status.success());
    let a = std::fs::read(dir.path().join("a/correlations.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/correlations.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn quick_selftest_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let out = skewlab(dir.path(), &["--out", "res", "selftest", "--quick", "--only", "11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] criterion 11"), "{stdout}");
}
