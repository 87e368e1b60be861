use std::process::Command;

fn pourflow(args: &[&str]) -> (Option<i32>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pourflow"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    (
        out.status.code(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(pourflow(&["bogus"]).0, Some(1));
    assert_eq!(
        pourflow(&["train", "--kind", "xyz", "--corpus", "c", "--out", "o"]).0,
        Some(1)
    );
    assert_eq!(pourflow(&["synth"]).0, Some(1));
}

#[test]
fn help_exits_0() {
    assert_eq!(pourflow(&["--help"]).0, Some(0));
    assert_eq!(pourflow(&["evaluate", "--help"]).0, Some(0));
}

#[test]
fn runtime_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    let out = dir.path().join("out");
    let (code, err) = pourflow(&[
        "train",
        "--kind",
        "vel",
        "--corpus",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(2));
    assert!(err.contains("does not exist"), "{err}");

    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "trials_per_combo = 0\nsample_rate_hz = -1.0\n").unwrap();
    let (code, err) = pourflow(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(2));
    assert!(
        err.contains("trials_per_combo") && err.contains("sample_rate_hz"),
        "{err}"
    );
}

#[test]
fn evaluate_reports_case_errors_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let out = dir.path().join("eval");
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        r#"
[[cups]]
id = "a"
diameter_mm = 70.0
height_mm = 95.0
mass_kg = 0.25

[[cups]]
id = "b"
diameter_mm = 80.0
height_mm = 100.0
mass_kg = 0.3

[[containers]]
id = "k"
diameter_mm = 100.0
height_mm = 110.0

[[containers]]
id = "j"
diameter_mm = 120.0
height_mm = 90.0

[[materials]]
id = "water"
density_ratio = 1.0
"#,
    )
    .unwrap();
    let c = corpus.to_str().unwrap();
    assert_eq!(
        pourflow(&["synth", "--spec", spec.to_str().unwrap(), "--out", c]).0,
        Some(0)
    );
    // Case 1 holds out cup b (2 trials); case 3 has no unseen material in this corpus.
    let (code, _) = pourflow(&[
        "evaluate",
        "--corpus",
        c,
        "--cases",
        "1,3",
        "--epochs",
        "5",
        "--hidden",
        "4",
        "--unseen-cups",
        "b",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(2));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("1,cup,2,2,true,"), "{}", rows[1]);
    assert!(
        rows[2].starts_with("3,") && rows[2].contains("no test trials"),
        "{}",
        rows[2]
    );
    assert!(out.join("case_1/h1.csv").exists());
    assert!(out.join("case_3/report.json").exists());
}
