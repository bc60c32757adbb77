use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("toy.csv")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smartbayes")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = run(&["bench", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--label-col"));
}

#[test]
fn missing_data_is_a_usage_error_naming_the_flag() {
    let out = run(&["bench", "--label-col", "label", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn unknown_label_column_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let res = run(&["fit", "--data", s(&toy()), "--label-col", "nope", "--model", "nb", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!res.stderr.is_empty());
    assert!(!out.exists());
}

#[test]
fn fit_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["nb", "lr", "sb"] {
        let json = dir.path().join(format!("{model}.json"));
        let pred = dir.path().join(format!("{model}.csv"));
        let fit = run(&["fit", "--data", s(&toy()), "--label-col", "label", "--model", model, "--out", s(&json)]);
        assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
        let text = fs::read_to_string(&json).unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        if model == "sb" {
            assert!(text.contains("odds_ratio_per_unit_z"));
        }
        let res = run(&["predict", "--model", s(&json), "--data", s(&toy()), "--out", s(&pred)]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        let csv = fs::read_to_string(&pred).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("row,score,predicted"));
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        assert_eq!(rows.len(), 200);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r[0], i.to_string());
            let score: f64 = r[1].parse().unwrap();
            assert_eq!(r[2], if score >= 0.0 { "1" } else { "0" });
        }
    }
}

#[test]
fn ratio_table_has_requested_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ratio.csv");
    let res = run(&[
        "ratio", "--data", s(&toy()), "--label-col", "label", "--feature", "x1", "--grid", "-2:2:41", "--out", s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,z_spline,z_gaussian"));
    let xs: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(xs.len(), 41);
    assert_eq!((xs[0], xs[20], xs[40]), (-2.0, 0.0, 2.0));

    let bad = run(&["ratio", "--data", s(&toy()), "--label-col", "label", "--feature", "zz", "--grid", "0:1:3", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let svg = dir.path().join("a.svg");
    let flags = dir.path().join("flags.csv");
    let res = run(&[
        "bench", "--data", s(&toy()), "--label-col", "label", "--sizes", "40,80", "--reps", "4", "--seed", "3",
        "--classifiers", "nb,sb", "--out", s(&curve), "--svg", s(&svg), "--flags", s(&flags),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(fs::read_to_string(&flags).unwrap().starts_with("dataset,classifier,train_size,flagged\n"));
    let replot = dir.path().join("b.svg");
    assert!(run(&["plot", "--in", s(&curve), "--out", s(&replot)]).status.success());
    let svg_text = fs::read_to_string(&replot).unwrap();
    assert_eq!(svg_text.matches("<polyline").count(), 2);
    assert!(svg_text.contains(">NB<") && svg_text.contains(">SB<") && !svg_text.contains(">LR<"));
}

#[test]
fn simulate_with_params_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let res = run(&[
        "simulate", "--dist", "gaussian", "--p", "2", "--params-from", s(&toy()), "--label-col", "label", "--sizes", "30,60",
        "--reps", "3", "--seed", "1", "--out", s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 7);
    let missing_label = run(&["simulate", "--dist", "t", "--params-from", s(&toy()), "--sizes", "30", "--out", s(&out)]);
    assert_eq!(missing_label.status.code(), Some(1));
}
