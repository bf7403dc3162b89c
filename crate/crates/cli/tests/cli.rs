use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn superflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two 800-day basins starting 2004-12-02 and a config with small forests.
fn fixture(dir: &Path) {
    let o = superflow(&[
        "synth",
        "--out",
        p(&dir.join("basins")),
        "--n-basins",
        "2",
        "--n-days",
        "800",
        "--seed",
        "5",
        "--start-date",
        "2004-12-02",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let config = format!(
        r#"master_seed = 9
store_forecasts = true

[split.train]
start = "2005-01-01"
end = "2005-12-31"

[split.test]
start = "2006-01-01"
end = "2006-12-31"

[importance.forest]
n_trees = 40

[learners.random_forest]
n_trees = 40

[learners.extra_trees]
n_trees = 40

[manifest]
kind = "files"
paths = ["{0}/synth-5.csv", "{0}/synth-6.csv"]
"#,
        p(&dir.join("basins"))
    );
    fs::write(dir.join("small.toml"), config).unwrap();
}

#[test]
fn synth_writes_simple_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = superflow(&[
        "synth",
        "--out",
        p(&out),
        "--n-basins",
        "2",
        "--n-days",
        "50",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("synth-4.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("date,q,p,t"));
    assert_eq!(lines.count(), 50);
    assert!(text.contains("2003-12-02,"));
}

#[test]
fn run_is_deterministic_across_workers_and_report_reexports() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let cfg = dir.path().join("small.toml");
    let mut outs = Vec::new();
    for workers in ["1", "2"] {
        let out = dir.path().join(format!("out{workers}"));
        let o = superflow(&["run", "--config", p(&cfg), "--out", p(&out), "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(out);
    }
    let files = [
        "report.json",
        "config.json",
        "metrics.csv",
        "ranks.csv",
        "improvements.csv",
        "weights.csv",
        "summary.csv",
        "manifest.json",
    ];
    for f in files {
        assert_eq!(
            fs::read(outs[0].join(f)).unwrap(),
            fs::read(outs[1].join(f)).unwrap(),
            "{f}"
        );
    }

    let again = dir.path().join("again");
    let o = superflow(&["report", "--from", p(&outs[0].join("report.json")), "--out", p(&again)]);
    assert_eq!(code(&o), 0);
    for f in files {
        assert_eq!(
            fs::read(outs[0].join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn short_basin_gives_partial_exit() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let short = dir.path().join("short");
    let o = superflow(&[
        "synth",
        "--out",
        p(&short),
        "--n-days",
        "500",
        "--seed",
        "1",
        "--start-date",
        "2004-12-02",
    ]);
    assert_eq!(code(&o), 0);
    let out = dir.path().join("out");
    let o = superflow(&[
        "run",
        "--config",
        p(&dir.path().join("small.toml")),
        "--out",
        p(&out),
        "--basin",
        p(&dir.path().join("basins/synth-5.csv")),
        "--basin",
        p(&short.join("synth-1.csv")),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("synth-1"));
}

#[test]
fn fit_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let basin = dir.path().join("basins/synth-5.csv");
    let model = dir.path().join("lr.json");
    let o = superflow(&[
        "fit",
        "--basin",
        p(&basin),
        "--learner",
        "linear_regression",
        "--train",
        "2005-01-01..2005-12-31",
        "--predictors",
        "Q1,P1,T1",
        "--out",
        p(&model),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = superflow(&[
        "predict",
        "--basin",
        p(&basin),
        "--model",
        p(&model),
        "--period",
        "2006-01-01..2006-01-10",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "date,forecast,observed");
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("2006-01-01,"));
}

#[test]
fn select_vars_reports_predictors() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = superflow(&[
        "select-vars",
        "--basin",
        p(&dir.path().join("basins/synth-5.csv")),
        "--train",
        "2005-01-01..2005-12-31",
        "--n-trees",
        "30",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["importance"]["scores"].as_array().unwrap().len(), 90);
    assert!(!v["predictors"]["selected"].as_array().unwrap().is_empty());
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = superflow(&["run", "--out", p(dir.path()), "--fold-scheme", "random"]);
    assert_eq!(code(&o), 1);
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"folds": 1, "manifest": {"kind": "synthetic", "n_basins": 1, "n_days": 800}}"#,
    )
    .unwrap();
    let o = superflow(&["run", "--config", p(&bad), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let o = superflow(&["fit", "--basin", "x.csv", "--learner", "deep_forest", "--out", "m.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = superflow(&["run", "--basin", p(&missing), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "date,q,p,t\n2005-01-01,1.0,0.0,3.0\n2005-01-03,1.0,0.0,3.0\n").unwrap();
    let o = superflow(&[
        "select-vars",
        "--basin",
        p(&broken),
        "--train",
        "2005-01-01..2005-01-03",
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(
        stderr.contains("2005-01-02") || stderr.contains("2005-01-03"),
        "{stderr}"
    );
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&superflow(&["--help"])), 0);
    assert_eq!(code(&superflow(&["run", "--help"])), 0);
}
