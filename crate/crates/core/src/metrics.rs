//! Accuracy under every ground truth, belief elicitation and belief
//! conditioned accuracy (BCA).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Split};
use crate::dataset::{annotate, DatasetRecord};
use crate::error::{Error, Result};
use crate::oracle::{self, GtKind};
use crate::predict::{standard_predict, Prediction, PredictionOutcome};
use crate::scoring::{score_dataset, ScorerSpec};
use crate::stats::{self, format_p, Proportion};
use crate::templates::{render_value, InstanceKind, McqaInstance, ValueTemplateKind};

/// A scorer's stated value preference for an item pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Belief {
    HGreater,
    LGreater,
    Equal,
}

impl Belief {
    /// Belief expressed by picking canonical value choice `index`.
    pub fn from_value_choice(index: usize) -> Belief {
        match index {
            0 => Belief::HGreater,
            1 => Belief::LGreater,
            _ => Belief::Equal,
        }
    }
}

impl FromStr for Belief {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h-greater" => Ok(Belief::HGreater),
            "l-greater" => Ok(Belief::LGreater),
            "equal" => Ok(Belief::Equal),
            _ => Err(Error::Invalid(format!("unknown belief `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefEntry {
    pub high: String,
    pub low: String,
    pub belief: Belief,
}

/// One belief per `(high, low)` item pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BeliefTable {
    entries: BTreeMap<(String, String), Belief>,
}

impl BeliefTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The same belief for every pair of `split`.
    pub fn uniform(catalog: &Catalog, split: Split, belief: Belief) -> Self {
        let mut t = BeliefTable::new();
        for (h, l) in catalog.pairs(split) {
            t.set(&h.name, &l.name, belief);
        }
        t
    }

    pub fn set(&mut self, high: &str, low: &str, belief: Belief) {
        self.entries.insert((high.to_string(), low.to_string()), belief);
    }

    pub fn get(&self, high: &str, low: &str) -> Result<Belief> {
        self.entries
            .get(&(high.to_string(), low.to_string()))
            .copied()
            .ok_or_else(|| Error::MissingBelief {
                high: high.to_string(),
                low: low.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> Vec<BeliefEntry> {
        self.entries
            .iter()
            .map(|((high, low), &belief)| BeliefEntry {
                high: high.clone(),
                low: low.clone(),
                belief,
            })
            .collect()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = BeliefEntry>) -> Result<Self> {
        let mut t = BeliefTable::new();
        for e in entries {
            if t.entries.contains_key(&(e.high.clone(), e.low.clone())) {
                return Err(Error::Invalid(format!(
                    "pair ({}, {}) has more than one belief",
                    e.high, e.low
                )));
            }
            t.set(&e.high, &e.low, e.belief);
        }
        Ok(t)
    }
}

/// The rational bet answer (displayed index) for someone holding `belief`.
///
/// Believing the low item is worth more swaps the item roles before
/// consulting the gain oracle; believing them equal makes not betting the
/// only answer with a determinate, non-negative gain.
pub fn bca_gt(instance: &McqaInstance, belief: Belief) -> Result<usize> {
    let InstanceKind::Bet { variant, .. } = instance.kind else {
        return Err(Error::WrongKind {
            expected: "bet",
            id: instance.id.clone(),
        });
    };
    let canonical = match belief {
        Belief::HGreater => oracle::canonical_bet_optimum(variant, &instance.id)?,
        Belief::LGreater => oracle::canonical_bet_optimum(variant.role_swapped(), &instance.id)?,
        Belief::Equal => 2,
    };
    Ok(instance.display_index(canonical))
}

/// How beliefs are read off value questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefSource {
    Template(ValueTemplateKind),
    /// Most frequent answer over all four templates; ties resolve in the
    /// order h-greater, l-greater, equal.
    ModeOfTemplates,
}

impl Default for BeliefSource {
    fn default() -> Self {
        BeliefSource::Template(ValueTemplateKind::ChoiceValuable)
    }
}

pub fn elicit_beliefs(
    scorer: &ScorerSpec,
    catalog: &Catalog,
    split: Split,
    source: BeliefSource,
) -> Result<BeliefTable> {
    let templates: Vec<ValueTemplateKind> = match source {
        BeliefSource::Template(t) => vec![t],
        BeliefSource::ModeOfTemplates => ValueTemplateKind::ALL.to_vec(),
    };
    let pairs = catalog.pairs(split);
    let mut votes: Vec<[usize; 3]> = vec![[0; 3]; pairs.len()];
    for template in templates {
        let records = pairs
            .iter()
            .map(|(h, l)| annotate(render_value(template, h, l)?))
            .collect::<Result<Vec<_>>>()?;
        let scores = score_dataset(scorer, &records)?;
        for ((vote, rec), score) in votes.iter_mut().zip(&records).zip(&scores) {
            let shown = standard_predict(&score.normalized);
            vote[rec.instance.canonical_index(shown)] += 1;
        }
    }
    let mut table = BeliefTable::new();
    for ((h, l), vote) in pairs.iter().zip(&votes) {
        let best = (0..3).fold(0, |b, i| if vote[i] > vote[b] { i } else { b });
        table.set(&h.name, &l.name, Belief::from_value_choice(best));
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Threshold,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Standard => "standard",
            Method::Threshold => "threshold",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Method::Standard),
            "threshold" => Ok(Method::Threshold),
            _ => Err(Error::Invalid(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Acc,
    Bca,
}

/// Correct/effective counts behind an accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub n_total: u64,
    pub n_excluded: u64,
    pub n_correct: u64,
}

impl Tally {
    pub fn n_effective(&self) -> u64 {
        self.n_total - self.n_excluded
    }

    /// Exact accuracy; `None` when nothing was evaluated.
    pub fn accuracy(&self) -> Option<Proportion> {
        let n = self.n_effective();
        (n > 0).then(|| Proportion::new(self.n_correct as i64, n as i64))
    }
}

/// One report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub scorer: String,
    pub dataset: String,
    pub method: Method,
    pub metric: Metric,
    /// `None` for the standard method.
    pub gt: Option<GtKind>,
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_dataset: Option<String>,
    pub n_total: u64,
    pub n_excluded: u64,
    pub n_correct: u64,
    pub accuracy: f64,
    #[serde(with = "crate::stats::ratio_string")]
    pub baseline: Proportion,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub p_display: Option<String>,
}

impl EvalSummary {
    pub fn new(
        scorer: &str,
        method: Method,
        metric: Metric,
        gt: Option<GtKind>,
        tally: Tally,
        baseline: Proportion,
    ) -> Result<Self> {
        let n = tally.n_effective();
        let accuracy = tally
            .accuracy()
            .ok_or_else(|| Error::EmptyEvaluation(format!("{scorer}: no instances evaluated")))?;
        let test = if n >= 2 {
            Some(stats::ztest(tally.n_correct, n, baseline)?)
        } else {
            None
        };
        Ok(EvalSummary {
            scorer: scorer.to_string(),
            dataset: String::new(),
            method,
            metric,
            gt,
            threshold: None,
            dev_dataset: None,
            n_total: tally.n_total,
            n_excluded: tally.n_excluded,
            n_correct: tally.n_correct,
            accuracy: accuracy.to_f64().unwrap_or(f64::NAN),
            baseline,
            z: test.map(|t| t.z).filter(|z| z.is_finite()),
            p_value: test.map(|t| t.p),
            p_display: test.map(|t| format_p(t.p)),
        })
    }

    pub fn tally(&self) -> Tally {
        Tally {
            n_total: self.n_total,
            n_excluded: self.n_excluded,
            n_correct: self.n_correct,
        }
    }

    pub fn exact_accuracy(&self) -> Option<Proportion> {
        self.tally().accuracy()
    }
}

fn aligned<'a>(
    predictions: &'a [Prediction],
    dataset: &'a [DatasetRecord],
) -> Result<impl Iterator<Item = (&'a PredictionOutcome, &'a DatasetRecord)>> {
    if predictions.len() != dataset.len() {
        return Err(Error::IdMismatch(format!(
            "{} predictions for {} instances",
            predictions.len(),
            dataset.len()
        )));
    }
    if let Some((p, r)) = predictions.iter().zip(dataset).find(|(p, r)| p.id != r.id()) {
        return Err(Error::IdMismatch(format!(
            "prediction `{}` lines up with instance `{}`",
            p.id,
            r.id()
        )));
    }
    Ok(predictions.iter().map(|p| &p.outcome).zip(dataset))
}

fn single(outcome: &PredictionOutcome, id: &str) -> Result<usize> {
    match outcome {
        PredictionOutcome::Single(i) => Ok(*i),
        PredictionOutcome::Subset(_) => Err(Error::Invalid(format!(
            "`{id}` has a subset prediction where a single choice is required"
        ))),
    }
}

/// Standard-method counts: correct iff the prediction is the embedded answer.
pub fn tally_standard(predictions: &[Prediction], dataset: &[DatasetRecord]) -> Result<Tally> {
    let mut t = Tally::default();
    for (outcome, rec) in aligned(predictions, dataset)? {
        t.n_total += 1;
        if single(outcome, rec.id())? == rec.standard_gt {
            t.n_correct += 1;
        }
    }
    Ok(t)
}

/// Threshold-method counts under `kind`; excluded records are counted but
/// not scored.
pub fn tally_threshold(
    predictions: &[Prediction],
    dataset: &[DatasetRecord],
    kind: GtKind,
) -> Result<Tally> {
    let mut t = Tally::default();
    for (outcome, rec) in aligned(predictions, dataset)? {
        t.n_total += 1;
        if !rec.included_in(kind) {
            t.n_excluded += 1;
            continue;
        }
        let PredictionOutcome::Subset(subset) = outcome else {
            return Err(Error::Invalid(format!(
                "`{}` has a single-choice prediction where a subset is required",
                rec.id()
            )));
        };
        if rec.gt_set(kind)?.contains(subset) {
            t.n_correct += 1;
        }
    }
    Ok(t)
}

pub fn tally_bca(
    predictions: &[Prediction],
    dataset: &[DatasetRecord],
    beliefs: &BeliefTable,
) -> Result<Tally> {
    let mut t = Tally::default();
    for (outcome, rec) in aligned(predictions, dataset)? {
        let (high, low) = rec.instance.kind.items();
        let target = bca_gt(&rec.instance, beliefs.get(high, low)?)?;
        t.n_total += 1;
        if single(outcome, rec.id())? == target {
            t.n_correct += 1;
        }
    }
    Ok(t)
}

pub fn accuracy_standard(
    scorer: &str,
    predictions: &[Prediction],
    dataset: &[DatasetRecord],
) -> Result<EvalSummary> {
    let tally = tally_standard(predictions, dataset)?;
    EvalSummary::new(scorer, Method::Standard, Metric::Acc, None, tally, stats::random_baseline(None, dataset)?)
}

pub fn accuracy_threshold(
    scorer: &str,
    predictions: &[Prediction],
    dataset: &[DatasetRecord],
    kind: GtKind,
) -> Result<EvalSummary> {
    let tally = tally_threshold(predictions, dataset, kind)?;
    let baseline = stats::random_baseline(Some(kind), dataset)?;
    EvalSummary::new(scorer, Method::Threshold, Metric::Acc, Some(kind), tally, baseline)
}

pub fn bca(
    scorer: &str,
    predictions: &[Prediction],
    dataset: &[DatasetRecord],
    beliefs: &BeliefTable,
) -> Result<EvalSummary> {
    let tally = tally_bca(predictions, dataset, beliefs)?;
    EvalSummary::new(scorer, Method::Standard, Metric::Bca, None, tally, stats::random_baseline(None, dataset)?)
}

/// Index of records by id, for joining score files back to a dataset.
pub fn index_by_id(dataset: &[DatasetRecord]) -> HashMap<&str, &DatasetRecord> {
    dataset.iter().map(|r| (r.id(), r)).collect()
}
