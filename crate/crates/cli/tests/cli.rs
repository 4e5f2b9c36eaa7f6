use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hislr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hislr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hislr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    hislr(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// CSV body without the shape header, as numbers.
fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn small_synth(dir: &Path, class: &str, seed: &str) {
    ok(&[
        "synth",
        "--out-dir",
        p(dir),
        "--d",
        "30",
        "--k",
        "3",
        "--atoms-per-class",
        "4",
        "--tau",
        "4",
        "--active-class",
        class,
        "--seed",
        seed,
    ]);
}

#[test]
fn decompose_recovers_the_generating_group() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_synth(&data, "2", "3");
    let out = dir.path().join("dec");
    let summary = ok(&[
        "decompose",
        "--signal",
        p(&data.join("y.csv")),
        "--dictionary",
        p(&data.join("dictionary.bin")),
        "--out-dir",
        p(&out),
        "--outer-iters",
        "300",
        "--format",
        "json",
    ]);
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["iterations"], 300);
    assert_eq!(summary["rank"], 1);

    let x = read_csv(&out.join("x.csv"));
    let mass =
        |rows: std::ops::Range<usize>| -> f64 { x[rows].iter().flatten().map(|v| v.abs()).sum() };
    assert!(mass(8..12) >= 0.9 * mass(0..12));
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 300);
    assert!(out.join("l.csv").exists() && out.join("multiplier.csv").exists());
}

#[test]
fn zero_signal_gives_zero_factors() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "0", "1");
    let zero = dir.path().join("zero.csv");
    fs::write(&zero, "0,0,0\n".repeat(30)).unwrap();
    let out = dir.path().join("dec");
    ok(&[
        "decompose",
        "--signal",
        p(&zero),
        "--dictionary",
        p(&dir.path().join("dictionary.bin")),
        "--out-dir",
        p(&out),
    ]);
    for name in ["x.csv", "l.csv"] {
        assert!(read_csv(&out.join(name))
            .iter()
            .flatten()
            .all(|v| *v == 0.0));
    }
    assert_eq!(
        fs::read_to_string(out.join("history.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
}

#[test]
fn classify_names_the_generating_class() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "1", "8");
    for model in ["chislr", "slr"] {
        let out = ok(&[
            "classify",
            "--signal",
            p(&dir.path().join("y.csv")),
            "--dictionary",
            p(&dir.path().join("dictionary.bin")),
            "--model",
            model,
            "--format",
            "json",
        ]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["predicted"], "c2", "{model}");
        assert_eq!(v["residuals"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    small_synth(&a, "0", "5");
    small_synth(&b, "0", "5");
    small_synth(&c, "0", "6");
    for name in [
        "y.csv",
        "x_true.csv",
        "l_true.csv",
        "dictionary.bin",
        "spec.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    assert_ne!(
        fs::read(a.join("y.csv")).unwrap(),
        fs::read(c.join("y.csv")).unwrap()
    );
}

fn experiment_config(dir: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "source": {
            "kind": "synthetic",
            "spec": {"d": 30, "k": 3, "atoms_per_class": 4, "tau": 4, "noise_sigma": 0.02},
            "test_per_class": 2
        },
        "repeats": 5,
        "rng_seed": 1,
        "solver": {"model": "chislr", "outer_iters": 100}
    });
    let path = dir.join("exp.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn experiment_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path());
    let mut runs = Vec::new();
    let stem = dir.path().join("out").join("report");
    for _ in 0..2 {
        ok(&[
            "experiment",
            "--config",
            p(&cfg),
            "--repeats",
            "2",
            "--format",
            "json",
            "--output",
            p(&stem),
        ]);
        ok(&[
            "experiment",
            "--config",
            p(&cfg),
            "--repeats",
            "2",
            "--format",
            "csv",
            "--output",
            p(&stem),
        ]);
        let files: Vec<Vec<u8>> = [
            "report.json",
            "report_confusion.csv",
            "report_sensitivity.csv",
            "report_runs.csv",
        ]
        .iter()
        .map(|f| fs::read(dir.path().join("out").join(f)).unwrap())
        .collect();
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);

    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert_eq!(report["config"]["solver"]["outer_iters"], 100);
    assert_eq!(report["sensitivity"].as_array().unwrap().len(), 3);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path());
    let out = ok(&[
        "experiment",
        "--config",
        p(&cfg),
        "--repeats",
        "1",
        "--model",
        "slr",
        "--lambda-l",
        "7",
        "--outer-iters",
        "20",
        "--seed",
        "9",
        "--tau-tst",
        "3",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let c = &v["config"];
    assert_eq!(c["solver"]["model"], "slr");
    assert_eq!(c["solver"]["lambda_l"], 7.0);
    assert_eq!(c["solver"]["outer_iters"], 20);
    assert_eq!(c["repeats"], 1);
    assert_eq!(c["rng_seed"], 9);
    assert_eq!(c["source"]["spec"]["tau"], 3);
    assert_eq!(c["source"]["spec"]["d"], 30);
}

#[test]
fn report_rerenders_a_saved_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path());
    let json = ok(&[
        "experiment",
        "--config",
        p(&cfg),
        "--repeats",
        "1",
        "--format",
        "json",
    ]);
    let saved = dir.path().join("saved.json");
    fs::write(&saved, &json).unwrap();
    let csv = ok(&["report", "--input", p(&saved), "--format", "csv"]);
    assert!(csv.starts_with("truth,c1,c2,c3\n"), "{csv}");
    assert_eq!(csv.lines().count(), 4);
    let table = ok(&["report", "--input", p(&saved)]);
    assert!(table.contains("recognition rate"));
    assert_eq!(
        ok(&["report", "--input", p(&saved), "--format", "json"]),
        json
    );
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "0", "2");
    let y = dir.path().join("y.csv");
    let d = dir.path().join("dictionary.bin");
    let out = dir.path().join("o");
    assert_eq!(
        code(&[
            "decompose",
            "--signal",
            "/nonexistent.csv",
            "--dictionary",
            p(&d),
            "--out-dir",
            p(&out)
        ]),
        2
    );
    assert_eq!(
        code(&[
            "decompose",
            "--signal",
            p(&y),
            "--dictionary",
            p(&d),
            "--out-dir",
            p(&out),
            "--lambda-l",
            "-1"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "classify",
            "--signal",
            p(&y),
            "--dictionary",
            p(&d),
            "--model",
            "svm"
        ]),
        2
    );
    assert_eq!(
        code(&["classify", "--signal", p(&d), "--dictionary", p(&d)]),
        2
    );
    assert_eq!(
        code(&["classify", "--signal", p(&y), "--dictionary", p(&y)]),
        2
    );
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"solver": {"lambda": 1}}"#).unwrap();
    assert_eq!(
        code(&[
            "classify",
            "--signal",
            p(&y),
            "--dictionary",
            p(&d),
            "--config",
            p(&bad)
        ]),
        2
    );
    assert_eq!(code(&["experiment", "--tau-trn", "3", "--repeats", "1"]), 2);
    assert_eq!(
        code(&["synth", "--out-dir", p(&out), "--active-class", "9"]),
        2
    );
    let short = dir.path().join("short.csv");
    fs::write(&short, "1,2\n3,4\n").unwrap();
    assert_eq!(
        code(&["classify", "--signal", p(&short), "--dictionary", p(&d)]),
        2
    );
}

#[test]
fn numeric_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "0", "2");
    let nan = dir.path().join("nan.csv");
    let mut rows = vec!["0,0,0,0".to_string(); 30];
    rows[4] = "0,NaN,0,0".into();
    fs::write(&nan, rows.join("\n") + "\n").unwrap();
    let out = hislr(&[
        "classify",
        "--signal",
        p(&nan),
        "--dictionary",
        p(&dir.path().join("dictionary.bin")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
