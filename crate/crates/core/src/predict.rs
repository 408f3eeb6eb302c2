//! Standard (argmax) and threshold (multi-label) predicting functions, and
//! dev-set threshold selection.

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::oracle::{GtKind, PredictionSubset};
use crate::templates::NUM_CHOICES;

/// Number of grid points: 0.00, 0.01, ..., 1.00.
pub const GRID_POINTS: u32 = 101;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Threshold(value))
        } else {
            Err(Error::Invalid(format!("threshold {value} outside [0, 1]")))
        }
    }

    /// Grid point `k / 100`.
    pub fn grid(k: u32) -> Self {
        assert!(k < GRID_POINTS);
        Threshold(f64::from(k) / 100.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionOutcome {
    Single(usize),
    Subset(PredictionSubset),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub outcome: PredictionOutcome,
}

/// Lowest index attaining the maximum score.
pub fn standard_predict(scores: &[f64; NUM_CHOICES]) -> usize {
    let mut best = 0;
    for i in 1..NUM_CHOICES {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

/// Every choice scoring strictly above `threshold`; possibly empty.
pub fn threshold_predict(scores: &[f64; NUM_CHOICES], threshold: Threshold) -> PredictionSubset {
    let picked: Vec<usize> = (0..NUM_CHOICES)
        .filter(|&i| scores[i] > threshold.value())
        .collect();
    PredictionSubset::from_indices(&picked)
}

/// A dev instance paired with its normalized scores.
#[derive(Debug, Clone, Copy)]
pub struct ScoredRecord<'a> {
    pub record: &'a DatasetRecord,
    pub normalized: [f64; NUM_CHOICES],
}

/// Number of correct threshold predictions at each grid point.
pub fn grid_correct_counts(dev: &[ScoredRecord<'_>], kind: GtKind) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; GRID_POINTS as usize];
    for s in dev {
        let gt = s.record.gt_set(kind)?;
        for (k, count) in counts.iter_mut().enumerate() {
            let pred = threshold_predict(&s.normalized, Threshold::grid(k as u32));
            if gt.contains(&pred) {
                *count += 1;
            }
        }
    }
    Ok(counts)
}

/// Picks the median of all accuracy-maximizing grid thresholds.
///
/// Records excluded from `kind` (non-applicable questions under positive
/// gain) are dropped first. With an even number of maximizers the two
/// middle values are averaged.
pub fn grid_search(dev: &[ScoredRecord<'_>], kind: GtKind) -> Result<Threshold> {
    let included: Vec<ScoredRecord<'_>> = dev
        .iter()
        .copied()
        .filter(|s| s.record.included_in(kind))
        .collect();
    if included.is_empty() {
        return Err(Error::EmptyEvaluation(format!("no dev instances for {kind}")));
    }
    let counts = grid_correct_counts(&included, kind)?;
    let best = *counts.iter().max().expect("non-empty grid");
    let maximizers: Vec<u32> = (0..GRID_POINTS).filter(|&k| counts[k as usize] == best).collect();
    let m = maximizers.len();
    let hundredths = if m % 2 == 1 {
        f64::from(maximizers[m / 2])
    } else {
        f64::from(maximizers[m / 2 - 1] + maximizers[m / 2]) / 2.0
    };
    Threshold::new(hundredths / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_catalog, Split};
    use crate::dataset::annotate_all;
    use crate::templates::{generate, BetModality, DatasetSpec};

    fn s(idx: &[usize]) -> PredictionSubset {
        PredictionSubset::from_indices(idx)
    }

    #[test]
    fn standard_examples() {
        assert_eq!(standard_predict(&[0.9, 0.2, 0.1]), 0);
        assert_eq!(standard_predict(&[0.4, 0.4, 0.1]), 0);
        assert_eq!(standard_predict(&[0.1, 0.2, 0.9]), 2);
        assert_eq!(standard_predict(&[0.1, 0.5, 0.5]), 1);
    }

    #[test]
    fn threshold_examples() {
        let t = Threshold::new(0.5).unwrap();
        assert_eq!(threshold_predict(&[0.9, 0.6, 0.1], t), s(&[0, 1]));
        assert_eq!(threshold_predict(&[0.4, 0.3, 0.2], t), PredictionSubset::EMPTY);
        assert_eq!(threshold_predict(&[0.5, 0.5, 0.5], t), PredictionSubset::EMPTY);
        assert_eq!(
            threshold_predict(&[1.0, 1.0, 1.0], Threshold::grid(100)),
            PredictionSubset::EMPTY
        );
    }

    #[test]
    fn threshold_bounds() {
        assert!(Threshold::new(-0.01).is_err());
        assert!(Threshold::new(1.01).is_err());
        assert_eq!(Threshold::grid(45).value(), 0.45);
    }

    fn dev_records() -> Vec<DatasetRecord> {
        annotate_all(generate(&default_catalog(), Split::Dev, DatasetSpec::Bet { modality: BetModality::Coin })).unwrap()
    }

    #[test]
    fn single_instance_median() {
        let recs = dev_records();
        // w0H: strict truth is {0}.
        let dev = [ScoredRecord { record: &recs[0], normalized: [0.8, 0.1, 0.1] }];
        let counts = grid_correct_counts(&dev, GtKind::Strict).unwrap();
        let maximizers: Vec<usize> = (0..101).filter(|&k| counts[k] == 1).collect();
        assert_eq!(maximizers.first(), Some(&10));
        assert_eq!(maximizers.last(), Some(&79));
        assert_eq!(maximizers.len(), 70);
        let t = grid_search(&dev, GtKind::Strict).unwrap();
        assert!((t.value() - 0.445).abs() < 1e-12);
    }

    #[test]
    fn degenerate_tie_returns_midpoint() {
        let recs = dev_records();
        let dev: Vec<ScoredRecord<'_>> = recs
            .iter()
            .map(|r| ScoredRecord { record: r, normalized: [0.5; 3] })
            .collect();
        assert!(grid_correct_counts(&dev, GtKind::Strict).unwrap().iter().all(|&c| c == 0));
        assert_eq!(grid_search(&dev, GtKind::Strict).unwrap().value(), 0.5);
    }

    #[test]
    fn positive_gain_filters_and_errors_when_empty() {
        let recs = dev_records();
        let low_only: Vec<ScoredRecord<'_>> = recs
            .iter()
            .filter(|r| r.positive_applicable == Some(false))
            .map(|r| ScoredRecord { record: r, normalized: [0.5; 3] })
            .collect();
        assert!(matches!(
            grid_search(&low_only, GtKind::PositiveGain),
            Err(Error::EmptyEvaluation(_))
        ));
        assert!(grid_search(&low_only, GtKind::Strict).is_ok());
        assert!(grid_search(&[], GtKind::Strict).is_err());
    }

    proptest::proptest! {
        #[test]
        fn threshold_is_antitone(
            scores in proptest::array::uniform3(0.0f64..=1.0),
            a in 0u32..101,
            b in 0u32..101,
        ) {
            let (lo, hi) = (a.min(b), a.max(b));
            let wide = threshold_predict(&scores, Threshold::grid(lo));
            let narrow = threshold_predict(&scores, Threshold::grid(hi));
            proptest::prop_assert!(narrow.is_subset_of(wide));
        }

        #[test]
        fn grid_search_in_range(scores in proptest::collection::vec(proptest::array::uniform3(0.0f64..=1.0), 1..12)) {
            let recs = dev_records();
            let dev: Vec<ScoredRecord<'_>> = recs
                .iter()
                .zip(&scores)
                .map(|(r, s)| ScoredRecord { record: r, normalized: *s })
                .collect();
            let t1 = grid_search(&dev, GtKind::NonNegativeGain).unwrap();
            let t2 = grid_search(&dev, GtKind::NonNegativeGain).unwrap();
            proptest::prop_assert_eq!(t1, t2);
            proptest::prop_assert!((0.0..=1.0).contains(&t1.value()));
        }
    }
}
