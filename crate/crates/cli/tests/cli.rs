use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fxamm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fxamm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn fxamm")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn manifest(dir: &Path, output: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{output}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn quote_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = fxamm(dir.path(), &["quote", "--rule", "mixed", "--alpha", "0,1,5,25", "--sizes", "1..10"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rule,alpha,size,util_foreign,bid_dom_per_for,ask_dom_per_for,util_domestic,bid_for_per_dom,ask_for_per_dom"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 40);
    for r in &rows {
        // bid below ask on both sides, around s = 1.25
        assert!(r[3] < 1.25 && 1.25 < r[4]);
        assert!(r[6] < 0.8 && 0.8 < r[7]);
    }
    // a larger alpha flattens the curve: tighter quotes at the same size
    let width = |i: usize| rows[i][4] - rows[i][3];
    assert!(width(9) > width(19) && width(19) > width(29) && width(29) > width(39));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&fxamm(d, &["--help"])), 0);
    assert_eq!(code(&fxamm(d, &["simulate", "--bogus"])), 1);
    assert_eq!(code(&fxamm(d, &["simulate"])), 1);
    assert_eq!(code(&fxamm(d, &["simulate", "--synthetic", "--rule", "sum"])), 1);
    assert_eq!(code(&fxamm(d, &["quote", "--sizes", "0"])), 1);
    assert_eq!(code(&fxamm(d, &["simulate", "--input", "missing.csv"])), 2);
    std::fs::write(d.join("bad.csv"), "timestamp,bid_open\nnot a bar\n").unwrap();
    let out = fxamm(d, &["simulate", "--input", "bad.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv"));
    std::fs::write(d.join("c.conf"), "bogus = 1\n").unwrap();
    assert_eq!(code(&fxamm(d, &["quote", "--config", "c.conf"])), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.conf"), "# quote settings\nfee-bp = 5\nsizes = 1,2\n").unwrap();
    let out = fxamm(d, &["quote", "--config", "run.conf", "--output", "a.csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(manifest(d, "a.csv")["config"]["fee-bp"], "5");
    let out = fxamm(d, &["quote", "--config", "run.conf", "--fee-bp", "2", "--output", "b.csv"]);
    assert_eq!(code(&out), 0);
    let m = manifest(d, "b.csv");
    assert_eq!(m["config"]["fee-bp"], "2");
    assert_eq!(m["config"]["sizes"], "1,2");
    assert_eq!(std::fs::read_to_string(d.join("b.csv")).unwrap().lines().count(), 3);
}

#[test]
fn generated_bars_round_trip_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&fxamm(d, &["gen-data", "--sessions", "3", "--seed", "5", "--output", "bars.csv"])), 0);
    let out = fxamm(d, &["simulate", "--input", "bars.csv", "--json", "--output", "r.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["error"].is_null() && r["spread_bp"].as_f64().unwrap() > 0.0));

    let m = manifest(d, "r.json");
    let size = std::fs::metadata(d.join("bars.csv")).unwrap().len();
    assert_eq!(m["input"]["file"], "bars.csv");
    assert_eq!(m["input"]["bytes"], size);
    assert_eq!(m["input"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"][0]["file"], "r.json");
    assert!(m["config"].get("threads").is_none());

    // the file path and the in-memory generator give the same sessions
    let out = fxamm(d, &["simulate", "--synthetic", "--sessions", "3", "--seed", "5", "--json", "--output", "s.json"]);
    assert_eq!(code(&out), 0);
    let synth: Value = serde_json::from_slice(&std::fs::read(d.join("s.json")).unwrap()).unwrap();
    for (a, b) in rows.iter().zip(synth.as_array().unwrap()) {
        let (a, b) = (a["spread_bp"].as_f64().unwrap(), b["spread_bp"].as_f64().unwrap());
        assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
    }
}

#[test]
fn sweep_rows_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = fxamm(
        dir.path(),
        &["sweep", "--synthetic", "--sessions", "6", "--axis", "alpha", "--values", "0,5,50"],
    );
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis,value,variable,count,failed,median,mad,q1,q3,whisker_low,whisker_high,mean"
    );
    let spreads: Vec<f64> = lines
        .filter(|l| l.contains(",spread_bp,"))
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(spreads.len(), 3);
    assert!(spreads[0] > spreads[1] && spreads[1] > spreads[2], "{spreads:?}");
}
