use std::path::Path;
use std::process::{Command, Output};

use zslc::io::load_labels;

fn zslc<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_zslc")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", p(dir), "--d", "10", "--r", "8", "--ns", "6", "--nu", "4", "--seed", "7"];
    if !extra.contains(&"--per-class") {
        args.extend_from_slice(&["--per-class", "100"]);
    }
    args.extend_from_slice(extra);
    let out = zslc(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_fit_smoke_path() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("dir");
    let run = tmp.path().join("run");
    synth(&data, &[]);
    let out = zslc(["fit", "--manifest", p(&data.join("manifest")), "--method", "joint-initR",
                    "--gamma", "1", "--out", p(&run)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_labels(run.join("labels")).unwrap().len(), 400);
    for file in ["mapping", "report.txt", "trace.tsv", "clusters"] {
        assert!(run.join(file).exists(), "missing {file}");
    }
}

#[test]
fn fit_without_manifest_is_a_usage_error() {
    let out = zslc(["fit", "--gamma", "1", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--manifest"));
}

#[test]
fn fit_without_gamma_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let out = zslc(["fit", "--manifest", p(&tmp.path().join("manifest")), "--out", p(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--gamma"));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = zslc(["fit", "--manifest", p(&tmp.path().join("nope")), "--gamma", "1", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("IoError"));
}

#[test]
fn eval_on_noiseless_synthetic_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("dir");
    let run = tmp.path().join("run");
    synth(&data, &["--noise", "0"]);
    let fit = zslc(["fit", "--manifest", p(&data.join("manifest")), "--gamma", "1", "--out", p(&run)]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let out = zslc(["eval", "--pred", p(&run.join("labels")), "--truth", p(&data.join("truth_unseen")),
                    "--clusters", p(&run.join("clusters")), "--out", p(&run.join("eval.txt"))]);
    assert!(out.status.success());
    let report = std::fs::read_to_string(run.join("eval.txt")).unwrap();
    assert!(report.contains("accuracy_overall = 1"), "{report}");
    assert!(report.contains("majority_vote = 1"), "{report}");
}

#[test]
fn predict_applies_saved_mapping() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("dir");
    let run = tmp.path().join("run");
    synth(&data, &["--noise", "0"]);
    assert!(zslc(["fit", "--manifest", p(&data.join("manifest")), "--gamma", "1", "--out", p(&run)]).status.success());
    let out = zslc(["predict", "--mapping", p(&run.join("mapping")), "--features", p(&data.join("features_unseen")),
                    "--signatures", p(&data.join("signatures_unseen")), "--out", p(&run.join("predicted"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_labels(run.join("predicted")).unwrap(), load_labels(data.join("truth_unseen")).unwrap());
}

#[test]
fn cv_writes_report_and_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("dir");
    let cv = tmp.path().join("cv");
    synth(&data, &["--per-class", "20"]);
    let out = zslc(["cv", "--manifest", p(&data.join("manifest")), "--gammas", "0.1,1", "--betas", "1",
                    "--folds", "2", "--out", p(&cv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let selected = std::fs::read_to_string(cv.join("selected")).unwrap();
    assert!(selected.contains("gamma = ") && selected.contains("beta = 1"));
    let tsv = std::fs::read_to_string(cv.join("cv_report.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 2 * 2);
}
