use std::path::PathBuf;
use std::process::{Command, Output};

fn condsub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condsub")).args(args).output().expect("run condsub")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("condsub-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes()).records().map(Result::unwrap).collect()
}

#[test]
#[allow(clippy::approx_constant)] // 1.1284 is the documented example value
fn stable_potential_row_at_one() {
    let o = condsub(&["potential", "--family", "stable", "--alpha", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# condsub potential seed=0 config_sha256="));
    let row = csv_rows(&text).into_iter().find(|r| &r[0] == "1").expect("x = 1 row");
    let u: f64 = row[1].parse().unwrap();
    // U(x) = x^α / Γ(1+α) and Γ(3/2) = √π/2
    assert!((u - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12, "U(1) = {u}");
    assert!((u - 1.1284).abs() < 1e-4);
    assert_eq!(&row[3], "closed_form");
}

#[test]
fn malformed_config_exits_two() {
    let dir = scratch("bad");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"model": {"family": "stable", "alpha": 0.5}, "colour": "blue"}"#).unwrap();
    let o = condsub(&["potential", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field `colour`"));

    std::fs::write(&bad, r#"{"potential": {"points": 3, "extra": 1}}"#).unwrap();
    assert_eq!(condsub(&["potential", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(condsub(&["verify", "strip", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    std::fs::write(&bad, r#"{"model": {"family": "stable", "alpha": 1.5}}"#).unwrap();
    assert_eq!(condsub(&["potential", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(condsub(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(condsub(&["potential"]).status.code(), Some(2));
    assert_eq!(condsub(&["potential", "--family", "stable"]).status.code(), Some(2));
    assert_eq!(condsub(&["verify", "nothing"]).status.code(), Some(2));
    assert_eq!(condsub(&["simulate", "--family", "drift", "--kappa", "1", "--threads", "0"]).status.code(), Some(2));
    assert_eq!(condsub(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_supplies_model_and_flags_override_it() {
    let dir = scratch("cfg");
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"module": "potential", "seed": 11, "model": {"family": "drift", "kappa": 2.0},
            "potential": {"x_max": 1.0, "points": 3}, "inversion": {"terms": 30, "damping": 20}}"#,
    )
    .unwrap();
    let o = condsub(&["potential", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("seed=11"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    // U(x) = x/κ for a pure drift
    assert_eq!(rows[2][1].parse::<f64>().unwrap(), 0.5);

    let o = condsub(&["potential", "--config", cfg.to_str().unwrap(), "--points", "5", "--seed", "4"]);
    assert!(stdout(&o).contains("seed=4"));
    assert_eq!(csv_rows(&stdout(&o)).len(), 5);

    assert_eq!(condsub(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let args = ["condition", "strip", "--family", "stable", "--alpha", "0.6", "--paths", "300", "--seed", "5"];
    let one = condsub(&[&args[..], &["--threads", "1"]].concat());
    let four = condsub(&[&args[..], &["--threads", "4"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let other_seed =
        condsub(&["condition", "strip", "--family", "stable", "--alpha", "0.6", "--paths", "300", "--seed", "6"]);
    assert_ne!(one.stdout, other_seed.stdout);
}

#[test]
fn out_directory_and_json_format() {
    let dir = scratch("out");
    let o = condsub(&[
        "lastpassage",
        "--fixture",
        "birth_death",
        "--emit",
        "identities",
        "--points",
        "3",
        "--format",
        "json",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("lastpassage.json")).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 11 * 2);
    assert!(rows.iter().all(|r| r["residual"].as_f64().unwrap().abs() < 1e-8));
    assert_eq!(doc["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn path_outputs_have_the_documented_columns() {
    let o = condsub(&[
        "simulate",
        "--family",
        "cpd",
        "--kappa",
        "1",
        "--jump-rate",
        "2",
        "--jump-exp-rate",
        "1",
        "--paths",
        "3",
    ]);
    let text = stdout(&o);
    assert!(text.lines().nth(1) == Some("path,t,x,weight,killed"));
    let rows = csv_rows(&text);
    assert!(rows.iter().any(|r| &r[0] == "2"));

    let o = condsub(&["condition", "hit", "--family", "drift", "--kappa", "1", "--y", "2", "--paths", "1"]);
    let rows = csv_rows(&stdout(&o));
    let last = rows.last().unwrap();
    assert_eq!(last[2].parse::<f64>().unwrap(), 2.0);
    assert_eq!(&last[4], "1");
}

#[test]
fn tables_for_lamperti_and_ladderbox() {
    let o = condsub(&["lamperti", "--alpha", "0.5", "--lambdas", "1", "--paths", "200"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    // Φ(1) = Γ(2)/Γ(3/2) = 2/√π
    let phi: f64 = rows[0][1].parse().unwrap();
    assert!((phi - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);

    let o = condsub(&["ladderbox", "--emit", "histogram", "--nx", "2", "--ny", "2", "--paths", "500"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let count: f64 = rows.iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
    let expected: f64 = rows.iter().map(|r| r[5].parse::<f64>().unwrap()).sum();
    assert!((count - expected).abs() < 1e-6 * count);
}

#[test]
fn verify_report_round_trip() {
    let dir = scratch("verify");
    let o = condsub(&["verify", "overshoot", "--seed", "3", "--scale", "0.05", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.join("verify.json");
    let o = condsub(&["report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("overshoot,"));

    // a report whose check failed must keep failing
    let text = std::fs::read_to_string(&path).unwrap();
    let failed = text.replacen("\"status\": \"pass\"", "\"status\": \"fail\"", 1).replacen(
        "\"passed\": true",
        "\"passed\": false",
        2,
    );
    let bad = dir.join("failed.json");
    std::fs::write(&bad, failed).unwrap();
    assert_eq!(condsub(&["report", bad.to_str().unwrap()]).status.code(), Some(1));

    std::fs::write(&bad, "{}").unwrap();
    assert_eq!(condsub(&["report", bad.to_str().unwrap()]).status.code(), Some(2));
}
