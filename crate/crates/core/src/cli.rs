//! Command-line interface.
//!
//! Datasets, score files and reports are JSON-lines files. Every report row
//! is an [`EvalSummary`]; the same rows are rendered as a table on stdout.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;

use crate::catalog::{default_catalog, load_catalog, Catalog, Split};
use crate::dataset::{annotate_all, read_jsonl, write_jsonl, DatasetRecord};
use crate::error::{Error, Result};
use crate::metrics::{
    self, elicit_beliefs, Belief, BeliefEntry, BeliefSource, BeliefTable, EvalSummary, Method,
};
use crate::oracle::GtKind;
use crate::predict::{
    grid_search, standard_predict, threshold_predict, Prediction, PredictionOutcome, ScoredRecord,
    Threshold,
};
use crate::scoring::{score_dataset, NormalizationMode, ScoreRecord, ScorerSpec};
use crate::stats::{self, format_p, run_p_value_fixtures, Proportion, SeDenominator};
use crate::templates::{generate_with, BetModality, DatasetSpec, GenerateOptions, InstanceKind, ValueTemplateKind};

#[derive(Debug, Parser)]
#[command(name = "betbench", version, about = "Value and bet question benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a dataset with embedded ground truths.
    Generate(GenerateArgs),
    /// Score a dataset and report accuracy.
    Evaluate(EvaluateArgs),
    /// Report belief conditioned accuracy next to ordinary accuracy.
    Bca(BcaArgs),
    /// Grid-search a threshold on a dev dataset.
    Calibrate(CalibrateArgs),
    /// Print random-guess baselines for every dataset kind.
    Baselines(CatalogArgs),
    /// Check the embedded p-value and baseline fixtures.
    Fixtures(FixturesArgs),
    /// Render a report file as a table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Value,
    Bet,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Catalog file, or `default` for the built-in item table.
    #[arg(long, default_value = "default")]
    pub catalog: String,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub catalog: CatalogArgs,
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Value template (value datasets).
    #[arg(long)]
    pub template: Option<ValueTemplateKind>,
    /// Bet modality (bet datasets).
    #[arg(long)]
    pub modality: Option<BetModality>,
    #[arg(long)]
    pub split: Split,
    /// Permute each instance's choices (seeded by --seed).
    #[arg(long)]
    pub shuffle_choices: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScorerArgs {
    /// `builtin:NAME[:PARAM]` or `exec:COMMAND`.
    #[arg(long)]
    pub scorer: String,
    /// Score convention of an external scorer.
    #[arg(long, default_value = "raw-logit")]
    pub mode: NormalizationMode,
    /// Concurrent external scorer processes.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Seconds to wait for each external reply.
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
    /// Seed for seeded built-in scorers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Belief table (JSON lines of `{high, low, belief}`) for the
    /// belief-table scorer.
    #[arg(long)]
    pub beliefs: Option<PathBuf>,
}

impl ScorerArgs {
    pub fn build(&self) -> Result<ScorerSpec> {
        let mut spec = ScorerSpec::parse(&self.scorer, self.seed)?;
        if let ScorerSpec::External(ext) = &mut spec {
            ext.mode = self.mode;
            ext.workers = self.workers.max(1);
            ext.timeout = Duration::from_secs(self.timeout);
        }
        if let Some(path) = &self.beliefs {
            spec = spec.with_beliefs(read_beliefs(path)?);
        }
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long, value_enum, default_value = "standard")]
    pub method: MethodArg,
    /// Ground truths for the threshold method; defaults to all applicable.
    #[arg(long, value_delimiter = ',')]
    pub gt: Vec<GtKind>,
    /// Dev dataset used to pick θ (threshold method).
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Fixed θ instead of a grid search.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Also write the per-instance scores here.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Standard,
    Threshold,
}

#[derive(Debug, Args)]
pub struct BcaArgs {
    #[command(flatten)]
    pub catalog: CatalogArgs,
    /// Bet dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// Value template used to elicit beliefs.
    #[arg(long, conflicts_with = "belief_mode")]
    pub belief_template: Option<ValueTemplateKind>,
    /// Elicit beliefs as the most frequent answer over all value templates.
    #[arg(long)]
    pub belief_mode: bool,
    /// Skip elicitation and use this belief for every pair.
    #[arg(long, conflicts_with_all = ["belief_template", "belief_mode"])]
    pub force_beliefs: Option<Belief>,
    /// Write the elicited belief table here.
    #[arg(long)]
    pub beliefs_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub dev: PathBuf,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long, value_delimiter = ',')]
    pub gt: Vec<GtKind>,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long, value_enum, default_value = "n-minus-one")]
    pub se_denominator: SeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeArg {
    NMinusOne,
    N,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report file written by `evaluate` or `bca`.
    pub report: PathBuf,
}

pub fn load_catalog_arg(arg: &str) -> Result<Catalog> {
    if arg == "default" {
        return Ok(default_catalog());
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_catalog(&text)
}

pub fn read_beliefs(path: &Path) -> Result<BeliefTable> {
    BeliefTable::from_entries(read_jsonl::<BeliefEntry>(path)?)
}

/// Short name for a dataset, from its records rather than its path, so
/// reports do not depend on where files live.
pub fn dataset_label(records: &[DatasetRecord]) -> String {
    let Some(first) = records.first() else {
        return "empty".into();
    };
    let kind = match first.instance.kind {
        InstanceKind::Value { template, .. } => format!("value-{}", template.as_str()),
        InstanceKind::Bet { modality, .. } => format!("bet-{}", modality.as_str()),
    };
    let shuffled = if records.iter().any(|r| r.instance.permutation.is_some()) {
        "-shuffled"
    } else {
        ""
    };
    format!("{kind}-{}{shuffled}", first.instance.split.as_str())
}

/// Runs one command, writing human-readable output to `out`. Returns the
/// process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Bca(a) => cmd_bca(&a, out),
        Command::Calibrate(a) => cmd_calibrate(&a, out),
        Command::Baselines(a) => cmd_baselines(&a, out),
        Command::Fixtures(a) => cmd_fixtures(&a, out),
        Command::Report(a) => {
            let rows: Vec<EvalSummary> = read_jsonl(&a.report)?;
            out.write_all(render_table(&rows).as_bytes())?;
            Ok(0)
        }
    }
}

fn dataset_spec(a: &GenerateArgs) -> Result<DatasetSpec> {
    match a.kind {
        Kind::Value => {
            let template = a
                .template
                .ok_or_else(|| Error::Invalid("value datasets need --template".into()))?;
            Ok(DatasetSpec::Value { template })
        }
        Kind::Bet => {
            let modality = a
                .modality
                .ok_or_else(|| Error::Invalid("bet datasets need --modality".into()))?;
            Ok(DatasetSpec::Bet { modality })
        }
    }
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<i32> {
    let catalog = load_catalog_arg(&a.catalog.catalog)?;
    let spec = dataset_spec(a)?;
    let options = GenerateOptions {
        shuffle_seed: a.shuffle_choices.then_some(a.seed),
    };
    let records = annotate_all(generate_with(&catalog, a.split, spec, options))?;
    write_jsonl(&a.out, &records)?;
    writeln!(out, "wrote {} instances ({}) to {}", records.len(), dataset_label(&records), a.out.display())?;
    Ok(0)
}

fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let records: Vec<DatasetRecord> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(Error::EmptyEvaluation(format!("{} has no instances", path.display())));
    }
    Ok(records)
}

fn same_kind(a: &[DatasetRecord], b: &[DatasetRecord]) -> bool {
    a[0].is_bet() == b[0].is_bet()
}

fn gt_kinds(requested: &[GtKind], is_bet: bool) -> Result<Vec<GtKind>> {
    if requested.is_empty() {
        return Ok(GtKind::applicable(is_bet).to_vec());
    }
    if let Some(k) = requested.iter().find(|k| k.for_bets() != is_bet) {
        return Err(Error::Invalid(format!("ground truth {k} does not apply to this dataset")));
    }
    Ok(requested.to_vec())
}

fn scored<'a>(records: &'a [DatasetRecord], scores: &[ScoreRecord]) -> Vec<ScoredRecord<'a>> {
    records
        .iter()
        .zip(scores)
        .map(|(record, s)| ScoredRecord { record, normalized: s.normalized })
        .collect()
}

fn standard_predictions(scores: &[ScoreRecord]) -> Vec<Prediction> {
    scores
        .iter()
        .map(|s| Prediction {
            id: s.id.clone(),
            outcome: PredictionOutcome::Single(standard_predict(&s.normalized)),
        })
        .collect()
}

fn threshold_predictions(scores: &[ScoreRecord], theta: Threshold) -> Vec<Prediction> {
    scores
        .iter()
        .map(|s| Prediction {
            id: s.id.clone(),
            outcome: PredictionOutcome::Subset(threshold_predict(&s.normalized, theta)),
        })
        .collect()
}

fn emit(rows: &[EvalSummary], path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    if let Some(path) = path {
        write_jsonl(path, rows)?;
    }
    out.write_all(render_table(rows).as_bytes())?;
    Ok(())
}

/// Scores `records` and evaluates them; shared by `evaluate` and tests.
pub fn evaluate_dataset(
    scorer: &ScorerSpec,
    records: &[DatasetRecord],
    method: Method,
    gts: &[GtKind],
    dev: Option<&[DatasetRecord]>,
    theta: Option<f64>,
) -> Result<(Vec<EvalSummary>, Vec<ScoreRecord>)> {
    let scores = score_dataset(scorer, records)?;
    let label = dataset_label(records);
    let name = scorer.id();
    let mut rows = Vec::new();
    match method {
        Method::Standard => {
            let mut row = metrics::accuracy_standard(&name, &standard_predictions(&scores), records)?;
            row.dataset = label;
            rows.push(row);
        }
        Method::Threshold => {
            let kinds = gt_kinds(gts, records[0].is_bet())?;
            let dev_scores = match (theta, dev) {
                (Some(_), _) => None,
                (None, Some(dev)) => {
                    if !same_kind(records, dev) {
                        return Err(Error::Invalid("dev and test datasets must both be value or both be bet datasets".into()));
                    }
                    Some(score_dataset(scorer, dev)?)
                }
                (None, None) => {
                    return Err(Error::Invalid("threshold method needs --dev or --theta".into()))
                }
            };
            for kind in kinds {
                let t = match (&dev_scores, dev) {
                    (Some(ds), Some(dev)) => grid_search(&scored(dev, ds), kind)?,
                    _ => Threshold::new(theta.expect("checked above"))?,
                };
                let preds = threshold_predictions(&scores, t);
                let mut row = metrics::accuracy_threshold(&name, &preds, records, kind)?;
                row.dataset = label.clone();
                row.threshold = Some(t.value());
                row.dev_dataset = dev_scores.as_ref().and(dev).map(dataset_label);
                rows.push(row);
            }
        }
    }
    Ok((rows, scores))
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<i32> {
    let scorer = a.scorer.build()?;
    let records = read_dataset(&a.dataset)?;
    let dev = a.dev.as_deref().map(read_dataset).transpose()?;
    let method = match a.method {
        MethodArg::Standard => Method::Standard,
        MethodArg::Threshold => Method::Threshold,
    };
    let (rows, scores) = evaluate_dataset(&scorer, &records, method, &a.gt, dev.as_deref(), a.theta)?;
    if let Some(path) = &a.scores {
        write_jsonl(path, &scores)?;
    }
    emit(&rows, a.out.as_deref(), out)?;
    Ok(0)
}

/// Split shared by every record, needed to elicit beliefs over its pairs.
fn common_split(records: &[DatasetRecord]) -> Result<Split> {
    let split = records[0].instance.split;
    if records.iter().any(|r| r.instance.split != split) {
        return Err(Error::Invalid("dataset mixes splits".into()));
    }
    Ok(split)
}

/// ACC and BCA rows for a bet dataset.
pub fn bca_report(
    scorer: &ScorerSpec,
    records: &[DatasetRecord],
    beliefs: &BeliefTable,
) -> Result<Vec<EvalSummary>> {
    if let Some(r) = records.iter().find(|r| !r.is_bet()) {
        return Err(Error::WrongKind { expected: "bet", id: r.id().to_string() });
    }
    let scores = score_dataset(scorer, records)?;
    let preds = standard_predictions(&scores);
    let name = scorer.id();
    let label = dataset_label(records);
    let mut acc = metrics::accuracy_standard(&name, &preds, records)?;
    let mut bca = metrics::bca(&name, &preds, records, beliefs)?;
    acc.dataset = label.clone();
    bca.dataset = label;
    Ok(vec![acc, bca])
}

pub fn cmd_bca(a: &BcaArgs, out: &mut dyn Write) -> Result<i32> {
    let catalog = load_catalog_arg(&a.catalog.catalog)?;
    let scorer = a.scorer.build()?;
    let records = read_dataset(&a.dataset)?;
    let split = common_split(&records)?;
    let beliefs = match a.force_beliefs {
        Some(b) => BeliefTable::uniform(&catalog, split, b),
        None => {
            let source = match (a.belief_mode, a.belief_template) {
                (true, _) => BeliefSource::ModeOfTemplates,
                (false, Some(t)) => BeliefSource::Template(t),
                (false, None) => BeliefSource::default(),
            };
            elicit_beliefs(&scorer, &catalog, split, source)?
        }
    };
    if let Some(path) = &a.beliefs_out {
        write_jsonl(path, &beliefs.entries())?;
    }
    let rows = bca_report(&scorer, &records, &beliefs)?;
    emit(&rows, a.out.as_deref(), out)?;
    Ok(0)
}

pub fn cmd_calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> Result<i32> {
    let scorer = a.scorer.build()?;
    let dev = read_dataset(&a.dev)?;
    let scores = score_dataset(&scorer, &dev)?;
    let label = dataset_label(&dev);
    for kind in gt_kinds(&a.gt, dev[0].is_bet())? {
        let t = grid_search(&scored(&dev, &scores), kind)?;
        let line = serde_json::json!({
            "scorer": scorer.id(),
            "dev_dataset": label,
            "gt": kind,
            "threshold": t.value(),
        });
        writeln!(out, "{line}")?;
    }
    Ok(0)
}

/// `(dataset, ground truth, baseline)` for every dataset kind on `split`.
pub fn baseline_table(catalog: &Catalog, split: Split) -> Result<Vec<(String, Option<GtKind>, Proportion)>> {
    let mut specs: Vec<DatasetSpec> = ValueTemplateKind::ALL
        .iter()
        .map(|&template| DatasetSpec::Value { template })
        .collect();
    specs.extend(BetModality::ALL.iter().map(|&modality| DatasetSpec::Bet { modality }));
    let mut rows = Vec::new();
    for spec in specs {
        let records = annotate_all(generate_with(catalog, split, spec, GenerateOptions::default()))?;
        let label = dataset_label(&records);
        rows.push((label.clone(), None, stats::random_baseline(None, &records)?));
        for kind in GtKind::applicable(records[0].is_bet()) {
            rows.push((label.clone(), Some(kind), stats::random_baseline(Some(kind), &records)?));
        }
    }
    Ok(rows)
}

pub fn cmd_baselines(a: &CatalogArgs, out: &mut dyn Write) -> Result<i32> {
    let catalog = load_catalog_arg(&a.catalog)?;
    writeln!(out, "{:<32} {:<18} {:>8} {:>7}", "dataset", "ground truth", "baseline", "")?;
    for (label, kind, p) in baseline_table(&catalog, Split::Test)? {
        let kind = kind.map_or("standard".to_string(), |k| k.to_string());
        writeln!(out, "{label:<32} {kind:<18} {:>8} {:>7.4}", p.to_string(), p.to_f64().unwrap_or(f64::NAN))?;
    }
    Ok(0)
}

/// Baselines the enumeration must reproduce on the default catalog.
pub const BASELINE_FIXTURES: [(Option<GtKind>, bool, (i64, i64)); 8] = [
    (None, false, (1, 3)),
    (None, true, (1, 3)),
    (Some(GtKind::Normal), false, (1, 8)),
    (Some(GtKind::WeakNormal), false, (2, 8)),
    (Some(GtKind::Weak), false, (5, 8)),
    (Some(GtKind::Strict), true, (1, 8)),
    (Some(GtKind::PositiveGain), true, (2, 8)),
    (Some(GtKind::NonNegativeGain), true, (2, 8)),
];

pub fn cmd_fixtures(a: &FixturesArgs, out: &mut dyn Write) -> Result<i32> {
    let se = match a.se_denominator {
        SeArg::NMinusOne => SeDenominator::SampleMinusOne,
        SeArg::N => SeDenominator::Sample,
    };
    let mut failures = 0;
    for f in run_p_value_fixtures(se) {
        let status = if f.passed() { "ok" } else { "FAIL" };
        failures += usize::from(!f.passed());
        writeln!(out, "p-value {:>3}/{:<3} expected {:>6} got {:>6} (p = {:.6}) {status}", f.k, f.n, f.expected, f.actual, f.p)?;
    }
    let table = baseline_table(&default_catalog(), Split::Test)?;
    for (kind, is_bet, (num, den)) in BASELINE_FIXTURES {
        let expected = Proportion::new(num, den);
        let matching: Vec<&Proportion> = table
            .iter()
            .filter(|(label, k, _)| *k == kind && label.starts_with("bet-") == is_bet)
            .map(|(_, _, p)| p)
            .collect();
        let ok = !matching.is_empty() && matching.iter().all(|p| **p == expected);
        failures += usize::from(!ok);
        let kind = kind.map_or("standard".to_string(), |k| k.to_string());
        let family = if is_bet { "bet" } else { "value" };
        writeln!(out, "baseline {family:<5} {kind:<18} expected {expected:>4} {}", if ok { "ok" } else { "FAIL" })?;
    }
    writeln!(out, "{failures} failure(s)")?;
    Ok(if failures == 0 { 0 } else { 1 })
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".to_string(), |v| format!("{v:.prec$}"))
}

/// Fixed-width table of report rows.
pub fn render_table(rows: &[EvalSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:<28} {:<9} {:<4} {:<18} {:>6} {:>5} {:>5} {:>7} {:>6} {:>8} {:>6}",
        "scorer", "dataset", "method", "met", "gt", "theta", "n", "excl", "correct", "acc", "baseline", "p"
    );
    for r in rows {
        let metric = match r.metric {
            metrics::Metric::Acc => "acc",
            metrics::Metric::Bca => "bca",
        };
        let _ = writeln!(
            s,
            "{:<24} {:<28} {:<9} {:<4} {:<18} {:>6} {:>5} {:>5} {:>7} {:>6.3} {:>8} {:>6}",
            r.scorer,
            r.dataset,
            r.method.to_string(),
            metric,
            r.gt.map_or("-".to_string(), |g| g.to_string()),
            fmt_opt(r.threshold, 3),
            r.n_total,
            r.n_excluded,
            r.n_correct,
            r.accuracy,
            r.baseline.to_string(),
            r.p_value.map_or("-".to_string(), format_p),
        );
    }
    s
}
