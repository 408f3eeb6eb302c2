//! Line-delimited dataset, score and report files.
//!
//! Every dataset record carries its ground truths, computed once at
//! generation time; evaluation reads them back and never re-derives them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{self, GtKind, PredictionSubset};
use crate::templates::McqaInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(flatten)]
    pub instance: McqaInstance,
    /// Displayed index of the standard-method answer.
    pub standard_gt: usize,
    /// Correct prediction subsets (as 3-bit masks over displayed choices)
    /// for each applicable threshold ground truth.
    pub subset_gt: BTreeMap<GtKind, Vec<PredictionSubset>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_applicable: Option<bool>,
}

impl DatasetRecord {
    pub fn id(&self) -> &str {
        &self.instance.id
    }

    pub fn is_bet(&self) -> bool {
        self.instance.kind.is_bet()
    }

    pub fn gt_set(&self, kind: GtKind) -> Result<&[PredictionSubset]> {
        self.subset_gt
            .get(&kind)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Invalid(format!("`{}` has no {kind} ground truth", self.id())))
    }

    /// Whether the record counts toward `kind`'s denominator.
    pub fn included_in(&self, kind: GtKind) -> bool {
        kind != GtKind::PositiveGain || self.positive_applicable == Some(true)
    }
}

/// Attaches every applicable ground truth to an instance.
pub fn annotate(instance: McqaInstance) -> Result<DatasetRecord> {
    let standard_gt = oracle::standard_gt(&instance)?;
    let is_bet = instance.kind.is_bet();
    let mut subset_gt = BTreeMap::new();
    for kind in GtKind::applicable(is_bet) {
        subset_gt.insert(kind, oracle::subset_gt(&instance, kind)?);
    }
    let positive_applicable = if is_bet {
        Some(!subset_gt[&GtKind::PositiveGain].is_empty())
    } else {
        None
    };
    Ok(DatasetRecord {
        instance,
        standard_gt,
        subset_gt,
        positive_applicable,
    })
}

pub fn annotate_all(instances: Vec<McqaInstance>) -> Result<Vec<DatasetRecord>> {
    instances.into_iter().map(annotate).collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_jsonl_to(&mut out, rows).map_err(|e| match e {
        Error::IoBare(e) => Error::io(path, e),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl_to<T: Serialize, W: Write>(out: &mut W, rows: &[T]) -> Result<()> {
    for row in rows {
        let line = serde_json::to_string(row).map_err(|e| Error::parse("record", e))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), lineno + 1), e))?;
        rows.push(row);
    }
    Ok(rows)
}
