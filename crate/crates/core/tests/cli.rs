use std::path::Path;

use betbench::cli::{self, Cli};
use betbench::dataset::{read_jsonl, DatasetRecord};
use betbench::metrics::{EvalSummary, Metric};
use betbench::oracle::{GtKind, PredictionSubset};
use betbench::stats::{format_p, ztest, Proportion};
use clap::Parser;

fn run(args: &[&str]) -> betbench::Result<(i32, String)> {
    let mut out = Vec::new();
    let mut argv = vec!["betbench"];
    argv.extend_from_slice(args);
    let code = cli::run(Cli::try_parse_from(argv).unwrap(), &mut out)?;
    Ok((code, String::from_utf8(out).unwrap()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", s(&out)]);
    run(&full).unwrap();
    out
}

#[test]
fn generate_value_dev() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "v.jsonl", &["--kind", "value", "--template", "choice_valuable", "--split", "dev"]);
    let recs: Vec<DatasetRecord> = read_jsonl(&path).unwrap();
    assert_eq!(recs.len(), 25);
    for r in &recs {
        assert_eq!(r.subset_gt[&GtKind::Normal], vec![PredictionSubset::single(0)]);
        assert_eq!(r.standard_gt, 0);
    }
}

#[test]
fn generate_requires_template_or_modality() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    assert!(run(&["generate", "--kind", "bet", "--split", "test", "--out", s(&out)]).is_err());
    assert!(run(&["generate", "--kind", "value", "--split", "test", "--out", s(&out)]).is_err());
}

#[test]
fn generate_with_custom_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = dir.path().join("catalog.json");
    std::fs::write(
        &catalog,
        r#"{"train": {"high": ["yacht"], "low": ["spoon"]},
            "dev": {"high": ["castle"], "low": ["pebble"]},
            "test": {"high": ["rocket", "palace"], "low": ["button"]}}"#,
    )
    .unwrap();
    let path = gen(dir.path(), "b.jsonl", &["--catalog", s(&catalog), "--kind", "bet", "--modality", "card", "--split", "test"]);
    let recs: Vec<DatasetRecord> = read_jsonl(&path).unwrap();
    assert_eq!(recs.len(), 8);
    assert!(recs[0].instance.prompt.contains("rocket") && recs[0].instance.prompt.contains("button"));
}

#[test]
fn evaluate_oracle_and_random() {
    let dir = tempfile::tempdir().unwrap();
    let test = gen(dir.path(), "t.jsonl", &["--kind", "bet", "--modality", "coin", "--split", "test"]);
    let dev = gen(dir.path(), "d.jsonl", &["--kind", "bet", "--modality", "card", "--split", "dev"]);
    let report = dir.path().join("r.jsonl");

    let (_, table) = run(&["evaluate", "--dataset", s(&test), "--scorer", "builtin:oracle", "--out", s(&report)]).unwrap();
    let rows: Vec<EvalSummary> = read_jsonl(&report).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].accuracy, 1.0);
    assert_eq!(rows[0].p_display.as_deref(), Some("<.001"));
    assert!(table.contains("bet-coin-test") && table.contains("<.001"), "{table}");

    run(&["evaluate", "--dataset", s(&test), "--scorer", "builtin:random:1", "--out", s(&report)]).unwrap();
    let row = &read_jsonl::<EvalSummary>(&report).unwrap()[0];
    assert!((row.accuracy - 1.0 / 3.0).abs() < 0.15, "{row:?}");
    let expected = ztest(row.n_correct, row.n_total, row.baseline).unwrap();
    assert_eq!(row.p_value, Some(expected.p));
    assert_eq!(row.p_display, Some(format_p(expected.p)));

    run(&["evaluate", "--dataset", s(&test), "--scorer", "builtin:oracle", "--method", "threshold", "--dev", s(&dev), "--out", s(&report)]).unwrap();
    let rows: Vec<EvalSummary> = read_jsonl(&report).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.threshold, Some(0.5));
        assert_eq!(r.dev_dataset.as_deref(), Some("bet-card-dev"));
    }
    let pg = rows.iter().find(|r| r.gt == Some(GtKind::PositiveGain)).unwrap();
    assert_eq!((pg.n_total, pg.n_excluded), (100, 50));
    assert_eq!(pg.baseline, Proportion::new(1, 4));

    let (_, rendered) = run(&["report", s(&report)]).unwrap();
    assert_eq!(rendered.lines().count(), 4);
}

#[test]
fn threshold_needs_matching_dev() {
    let dir = tempfile::tempdir().unwrap();
    let test = gen(dir.path(), "t.jsonl", &["--kind", "bet", "--modality", "dice", "--split", "test"]);
    let value_dev = gen(dir.path(), "v.jsonl", &["--kind", "value", "--template", "boolean_valuable", "--split", "dev"]);
    assert!(run(&["evaluate", "--dataset", s(&test), "--scorer", "builtin:oracle", "--method", "threshold"]).is_err());
    assert!(run(&["evaluate", "--dataset", s(&test), "--scorer", "builtin:oracle", "--method", "threshold", "--dev", s(&value_dev)]).is_err());
    assert!(run(&["evaluate", "--dataset", s(&test), "--scorer", "builtin:oracle", "--method", "threshold", "--dev", s(&test), "--gt", "weak"]).is_err());
}

#[test]
fn calibrate_prints_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let dev = gen(dir.path(), "d.jsonl", &["--kind", "bet", "--modality", "coin", "--split", "dev"]);
    let (_, out) = run(&["calibrate", "--dev", s(&dev), "--scorer", "builtin:oracle", "--gt", "strict,non_negative_gain"]).unwrap();
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["gt"], "strict");
    assert_eq!(lines[0]["threshold"], 0.5);
}

#[test]
fn bca_command() {
    let dir = tempfile::tempdir().unwrap();
    let test = gen(dir.path(), "t.jsonl", &["--kind", "bet", "--modality", "card", "--split", "test"]);
    let report = dir.path().join("r.jsonl");
    run(&["bca", "--dataset", s(&test), "--scorer", "builtin:oracle", "--out", s(&report)]).unwrap();
    let rows: Vec<EvalSummary> = read_jsonl(&report).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].metric, rows[1].metric), (Metric::Acc, Metric::Bca));
    assert_eq!(rows[0].accuracy, 1.0);
    assert_eq!(rows[1].accuracy, 1.0);

    run(&["bca", "--dataset", s(&test), "--scorer", "builtin:random:3", "--force-beliefs", "h-greater", "--out", s(&report)]).unwrap();
    let rows: Vec<EvalSummary> = read_jsonl(&report).unwrap();
    assert_eq!(rows[0].n_correct, rows[1].n_correct);

    run(&["bca", "--dataset", s(&test), "--scorer", "builtin:oracle", "--force-beliefs", "equal", "--out", s(&report)]).unwrap();
    let rows: Vec<EvalSummary> = read_jsonl(&report).unwrap();
    assert_eq!(rows[1].exact_accuracy(), Some(Proportion::new(1, 2)));

    let value = gen(dir.path(), "v.jsonl", &["--kind", "value", "--template", "boolean_valuable", "--split", "test"]);
    assert!(run(&["bca", "--dataset", s(&value), "--scorer", "builtin:oracle"]).is_err());
}

#[test]
fn fixtures_command() {
    let (code, out) = run(&["fixtures"]).unwrap();
    let failures = out.lines().filter(|l| l.ends_with("FAIL")).count();
    assert_eq!(code, i32::from(failures > 0));
    assert!(out.contains("baseline value weak") && out.lines().any(|l| l.contains("weak ") && l.contains("5/8") && l.ends_with("ok")), "{out}");
    assert!(out.lines().filter(|l| l.starts_with("baseline")).all(|l| l.ends_with("ok")), "{out}");

    let (code, out) = run(&["fixtures", "--se-denominator", "n"]).unwrap();
    assert_eq!(code, 1);
    assert!(out.lines().filter(|l| l.starts_with("p-value") && l.ends_with("FAIL")).count() >= 3, "{out}");
}

#[test]
fn baselines_command() {
    let (code, out) = run(&["baselines"]).unwrap();
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l.starts_with("value-boolean_expensive-test") && l.contains("weak ") && l.contains("5/8")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("bet-dice-test") && l.contains("positive_gain") && l.contains("1/4")), "{out}");
}
