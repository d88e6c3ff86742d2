use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smctrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smctrl"))
        .args(args)
        .output()
        .unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

fn out_path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let p = out_path(dir, name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn zero_hazard_simulation_has_no_jumps() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        &dir,
        "still.json",
        r#"{"states":["a","b"],"hazard":{"a":{"breaks":[0],"values":[0]},"b":{"breaks":[0],"values":[0]}}}"#,
    );
    let out = out_path(&dir, "paths.csv");
    let o = smctrl(&[
        "simulate",
        "--model",
        &model,
        "--start",
        "a:0",
        "--horizon",
        "5",
        "--paths",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        std::fs::read_to_string(&out).unwrap().trim(),
        "path_id,jump_index,time,mark"
    );
}

#[test]
fn verify_example_passes() {
    let o = smctrl(&["verify-example", "--alpha", "2.0", "--paths", "20000"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = smctrl(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn malformed_model_reports_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        &dir,
        "bad.json",
        r#"{"states":["a","b"],"hazard":{"a":{"breaks":[0],"values":[-1]}},"kernel":{"a":[[0,1]]}}"#,
    );
    let out = out_path(&dir, "paths.csv");
    let o = smctrl(&[
        "simulate",
        "--model",
        &model,
        "--start",
        "a:0",
        "--horizon",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("hazard.a"), "{err}");
}

#[test]
fn outputs_are_reproducible_and_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let model = data("example_model.json");
    let problem = data("example_problem.json");
    let before = std::fs::read(&model).unwrap();
    let runs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
        .map(|k| {
            let out = out_path(&dir, &format!("paths{k}.csv"));
            let o = smctrl(&[
                "simulate",
                "--model",
                &model,
                "--start",
                "x1:0",
                "--horizon",
                "1",
                "--paths",
                "500",
                "--seed",
                "9",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0));
            let manifest =
                std::fs::read_to_string(format!("{}.manifest.json", out.display())).unwrap();
            let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
            assert_eq!(m["seed"], 9);
            (
                std::fs::read(&out).unwrap(),
                m["output_sha256"].as_str().unwrap().as_bytes().to_vec(),
            )
        })
        .collect();
    assert_eq!(runs[0], runs[1]);

    let policy = out_path(&dir, "policy.csv");
    let o = smctrl(&[
        "control",
        "--model",
        &model,
        "--problem",
        &problem,
        "--dt",
        "0.01",
        "--out",
        policy.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let evals: Vec<String> = (0..2)
        .map(|k| {
            let out = out_path(&dir, &format!("eval{k}.json"));
            let o = smctrl(&[
                "evaluate",
                "--model",
                &model,
                "--problem",
                &problem,
                "--policy",
                policy.to_str().unwrap(),
                "--paths",
                "2000",
                "--seed",
                "3",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(
                o.status.code(),
                Some(0),
                "{}",
                String::from_utf8_lossy(&o.stderr)
            );
            std::fs::read_to_string(out).unwrap()
        })
        .collect();
    assert_eq!(evals[0], evals[1]);
    assert_eq!(std::fs::read(&model).unwrap(), before);
}

#[test]
fn solve_methods_agree_on_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let model = data("example_model.json");
    let problem = data("example_problem.json");
    let read = |method: &str| {
        let out = out_path(&dir, &format!("{method}.csv"));
        let o = smctrl(&[
            "solve",
            "--model",
            &model,
            "--problem",
            &problem,
            "--dt",
            "0.01",
            "--method",
            method,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let mut r = csv::Reader::from_path(out).unwrap();
        let row = r.records().next().unwrap().unwrap();
        assert_eq!(&row[1], "x1");
        row[3].parse::<f64>().unwrap()
    };
    let (b, p) = (read("backward"), read("picard"));
    assert!((b - p).abs() < 0.05, "{b} {p}");
    assert!((b - (1.0 - 2.0 / std::f64::consts::E)).abs() < 0.01);
}
