use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn argpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_argpipe"))
        .args(args)
        .output()
        .expect("spawn argpipe")
}

fn ok(args: &[&str]) -> Output {
    let out = argpipe(args);
    assert!(
        out.status.success(),
        "argpipe {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_prints_token_table() {
    let out = ok(&["stats", s(&fixture("tiny.jsonl"))]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "| Type | Avg. # of tokens | Max. # of tokens | Min. # of tokens |"
    );
    assert!(lines.iter().any(|l| l.starts_with("| Court decision |")));
    assert!(lines.iter().any(|l| l.starts_with("| Human-written summary |")));
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    assert_eq!(argpipe(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(argpipe(&["stats"]).status.code(), Some(2));
    let missing = argpipe(&["stats", "/nonexistent/corpus.jsonl"]);
    assert_eq!(missing.status.code(), Some(1));
    let err = String::from_utf8(missing.stderr).unwrap();
    assert!(
        err.starts_with("error:") && err.contains("/nonexistent/corpus.jsonl"),
        "{err}"
    );
}

fn digest(path: &Path) -> String {
    format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
}

/// Runs every stage into `dir` and returns the digest of each artifact.
fn pipeline(dir: &Path) -> Vec<(String, String)> {
    let corpus = fixture("tiny.jsonl");
    let corpus = s(&corpus);
    let p = |f: &str| dir.join(f);
    ok(&["segment", corpus, "--segments", "3", "--out", s(&p("seg.jsonl"))]);
    ok(&[
        "label",
        corpus,
        "--segmentation",
        s(&p("seg.jsonl")),
        "--gold",
        "--out",
        s(&p("labels.jsonl")),
    ]);
    ok(&[
        "train",
        corpus,
        "--segmentation",
        s(&p("seg.jsonl")),
        "--epochs",
        "50",
        "--out",
        s(&p("model.json")),
    ]);
    ok(&[
        "predict",
        corpus,
        "--segmentation",
        s(&p("seg.jsonl")),
        "--model",
        s(&p("model.json")),
        "--out",
        s(&p("pred.jsonl")),
    ]);
    let labels = format!("predictions:{}", s(&p("pred.jsonl")));
    ok(&[
        "summarize",
        corpus,
        "--segmentation",
        s(&p("seg.jsonl")),
        "--labels",
        &labels,
        "--max-tokens",
        "64",
        "--out",
        s(&p("summaries.jsonl")),
    ]);
    ok(&[
        "score",
        "--candidates",
        s(&p("summaries.jsonl")),
        "--references",
        corpus,
        "--out",
        s(&p("scores.csv")),
    ]);
    ok(&["experiment", s(&fixture("tiny.conf")), "--out-dir", s(&p("exp"))]);

    let csv = std::fs::read_to_string(p("scores.csv")).unwrap();
    assert!(
        csv.starts_with("case_id,Length,Rouge-1,Rouge-2,Rouge-L,BLEU,METEOR,BERTScore\n"),
        "{csv}"
    );
    assert_eq!(
        std::fs::read_to_string(p("summaries.jsonl")).unwrap().lines().count(),
        3
    );

    [
        "seg.jsonl",
        "labels.jsonl",
        "model.json",
        "pred.jsonl",
        "summaries.jsonl",
        "scores.csv",
        "exp/report.md",
        "exp/report.csv",
    ]
    .iter()
    .map(|f| (f.to_string(), digest(&p(f))))
    .collect()
}

#[test]
fn full_pipeline_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(pipeline(a.path()), pipeline(b.path()));
}
