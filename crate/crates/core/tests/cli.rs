use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpmm::cli::exit_code;
use dpmm::Error;

fn dpmm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpmm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// gen → train → score → evaluate in `dir`, returning evaluate's stdout.
fn pipeline(dir: &Path, exact: bool) -> String {
    ok(&dpmm(
        &["gen", "--n", "400", "--features", "2", "--seed", "5", "--train-fraction", "0.8", "--out-dir", "."],
        dir,
    ));
    ok(&dpmm(
        &["train", "--data", "train.csv", "--schema", "schema.txt", "--truncation", "5", "--seed", "5"],
        dir,
    ));
    let mut score = vec!["score", "--model", "model.json", "--data", "test.csv", "--out", "scores.csv"];
    if exact {
        score.push("--exact");
    } else {
        score.extend(["--mc-samples", "50"]);
    }
    ok(&dpmm(&score, dir));
    let out = dpmm(
        &["evaluate", "--scores", "scores.csv", "--labels", "test_labels.csv", "--pr-out", "pr.csv", "--roc-out", "roc.csv"],
        dir,
    );
    ok(&out);
    String::from_utf8(out.stdout).unwrap()
}

const OUTPUTS: [&str; 13] = [
    "schema.txt",
    "data.csv",
    "labels.csv",
    "train.csv",
    "train_labels.csv",
    "test.csv",
    "test_labels.csv",
    "model.json",
    "elbo.csv",
    "scores.csv",
    "metrics.json",
    "pr.csv",
    "roc.csv",
];

#[test]
fn pipeline_runs_and_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let stdout = pipeline(a.path(), false);
    assert!(stdout.starts_with("average_precision "), "{stdout}");
    assert!(stdout.contains("\nroc_auc "));
    pipeline(b.path(), false);
    for name in OUTPUTS {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let scores = std::fs::read_to_string(a.path().join("scores.csv")).unwrap();
    assert!(scores.starts_with("id,score,rank\n"));
    assert_eq!(scores.lines().count(), 81);
}

#[test]
fn exact_scoring_runs_on_gaussian_models() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), true);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["roc_auc"].as_f64().unwrap() > 0.5);
}

#[test]
fn evaluate_matches_the_reference_implementation() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let out = dpmm(
        &[
            "evaluate",
            "--scores",
            f.join("eval_scores.csv").to_str().unwrap(),
            "--labels",
            f.join("eval_labels.csv").to_str().unwrap(),
        ],
        dir.path(),
    );
    ok(&out);
    let got: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    let want: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.join("eval_expected.json")).unwrap()).unwrap();
    for key in ["average_precision", "roc_auc"] {
        let (g, w) = (got[key].as_f64().unwrap(), want[key].as_f64().unwrap());
        assert!((g - w).abs() < 1e-12, "{key}: {g} vs {w}");
    }
    assert_eq!(got["n"], want["n"]);
    assert_eq!(got["positives"], want["positives"]);
}

#[test]
fn mixed_schema_trains_and_scores_with_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("schema.txt"), "x:real\nsize:categorical:s|m|l\nvisits:count\nok:binary\n").unwrap();
    let mut csv = String::from("x,size,visits,ok\n");
    for i in 0..60 {
        csv.push_str(&format!("{},{},{},{}\n", (i % 7) as f64 * 0.3, ["s", "m", "l"][i % 3], i % 5, i % 2));
    }
    std::fs::write(p.join("train.csv"), &csv).unwrap();
    std::fs::write(p.join("test.csv"), "x,size,visits,ok\n0.3,m,2,1\n50,xl,40,0\n").unwrap();
    ok(&dpmm(&["train", "--data", "train.csv", "--schema", "schema.txt", "--truncation", "3"], p));
    ok(&dpmm(&["score", "--model", "model.json", "--data", "test.csv"], p));
    let scores = std::fs::read_to_string(p.join("scores.csv")).unwrap();
    let rows: Vec<Vec<&str>> = scores.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[1][0]), ("1", "2"));
    // The far row with an unseen level ranks first.
    assert_eq!(rows[1][2], "1");

    let exact = dpmm(&["score", "--model", "model.json", "--data", "test.csv", "--exact"], p);
    assert_eq!(exact.status.code(), Some(2));
}

#[test]
fn user_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&dpmm(&["gen", "--n", "100", "--seed", "1", "--out-dir", "."], p));

    let missing_schema = dpmm(&["train", "--data", "data.csv", "--schema", "nope.txt"], p);
    assert_eq!(missing_schema.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_schema.stderr).starts_with("error: "));

    std::fs::write(p.join("bad_schema.txt"), "x0:real\nx1:complex\n").unwrap();
    let bad_schema = dpmm(&["train", "--data", "data.csv", "--schema", "bad_schema.txt"], p);
    assert_eq!(bad_schema.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_schema.stderr).contains("line 2"));

    std::fs::write(p.join("bad.conf"), "truncation=0\n").unwrap();
    let bad_config = dpmm(&["train", "--data", "data.csv", "--schema", "schema.txt", "--config", "bad.conf"], p);
    assert_eq!(bad_config.status.code(), Some(2));

    ok(&dpmm(&["train", "--data", "data.csv", "--schema", "schema.txt", "--truncation", "3"], p));
    std::fs::write(p.join("empty.csv"), "id,x0,x1\n").unwrap();
    let empty = dpmm(&["score", "--model", "model.json", "--data", "empty.csv"], p);
    assert_eq!(empty.status.code(), Some(2));

    ok(&dpmm(&["score", "--model", "model.json", "--data", "data.csv", "--mc-samples", "10"], p));
    std::fs::write(p.join("other_labels.csv"), "id,label\n1,0\n").unwrap();
    let mismatch = dpmm(&["evaluate", "--scores", "scores.csv", "--labels", "other_labels.csv"], p);
    assert_eq!(mismatch.status.code(), Some(2));

    let mut shifted = String::from("id,label\n");
    for i in 2..=101 {
        shifted.push_str(&format!("{i},{}\n", (i % 10 == 0) as u8));
    }
    std::fs::write(p.join("shifted_labels.csv"), shifted).unwrap();
    let unknown = dpmm(&["evaluate", "--scores", "scores.csv", "--labels", "shifted_labels.csv"], p);
    assert_eq!(unknown.status.code(), Some(2));

    let bad_flag = dpmm(&["train", "--bogus"], p);
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn numerical_failures_map_to_code_three() {
    assert_eq!(exit_code(&Error::ElboDecrease { iteration: 3, previous: -1.0, current: -2.0 }), 3);
    assert_eq!(exit_code(&Error::Numerical("nan".into())), 3);
    assert_eq!(exit_code(&Error::Conditioning("singular".into())), 3);
    assert_eq!(exit_code(&Error::Sampling("bad draw".into())), 3);
    assert_eq!(exit_code(&Error::Input("missing".into())), 2);
    assert_eq!(exit_code(&Error::UnsupportedSchema("categorical".into())), 2);
}
