use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn strata(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn rates_for_linear_field_have_expected_slopes() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "field = \"linear\"\nschemes = [\"ss1\", \"urs\"]\n",
    );
    let out = dir.path().join("out");
    let o = strata(&[
        "rates",
        "--config",
        &cfg,
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out.join("rates.json"));
    let ss1 = r["fits"]["ss1"]["slope"].as_f64().unwrap();
    let urs = r["fits"]["urs"]["slope"].as_f64().unwrap();
    assert!((ss1 + 2.0).abs() < 0.05, "ss1 slope {ss1}");
    assert!((urs + 1.0).abs() < 0.05, "urs slope {urs}");
    assert!(fs::read_to_string(out.join("rates.csv"))
        .unwrap()
        .starts_with("n,scheme,oracle_variance\n"));
}

#[test]
fn constant_field_estimate_is_region_area() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "field = \"constant\"\nscheme = \"ss1\"\nn = 9\n",
    );
    let out = dir.path().join("out");
    let o = strata(&[
        "estimate",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out.join("report.json"));
    let est = r["report"]["estimate"].as_f64().unwrap();
    assert!((est - 1.0).abs() < 1e-12, "{est}");
    assert!(out.join("plan.csv").exists());
}

#[test]
fn missing_region_file_is_a_config_error_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "region = \"nowhere.geojson\"\n");
    let o = strata(&["sample", "--config", &cfg, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.geojson"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(strata(&["frobnicate"]).status.code(), Some(2));

    let o = strata(&["sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));

    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "bogus = 3\n");
    let o = strata(&["sample", "--config", &cfg, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let o = strata(&["sample", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn exported_stratification_reloads_with_identical_diagnostics() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = strata(&[
        "stratify",
        "--seed",
        "3",
        "--n",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("strata.json")).unwrap();
    let s = strata::Stratification::from_json(&text).unwrap();
    let written = &json(&out.join("diagnostics.json"))["diagnostics"];
    assert_eq!(&serde_json::to_value(s.diagnostics()).unwrap(), written);
    assert_eq!(s.to_json().unwrap(), text);

    // The reloaded strata drive later runs.
    let cfg = config(
        dir.path(),
        &format!(
            "stratification = {:?}\nfield = \"constant\"\n",
            out.join("strata.json").to_str().unwrap()
        ),
    );
    let est = dir.path().join("e");
    let o = strata(&[
        "estimate",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        est.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&est.join("report.json"))["report"]["n"], 9);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = strata(&[
            "clt",
            "--seed",
            "11",
            "--n",
            "16",
            "--reps",
            "10000",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (
            o.stdout,
            fs::read(out.join("replicates.csv")).unwrap(),
            fs::read(out.join("clt.json")).unwrap(),
        )
    };
    assert_eq!(run("1"), run("2"));
}
