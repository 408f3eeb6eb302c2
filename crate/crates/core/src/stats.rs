//! One-sided z-tests against expected random performance.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::oracle::GtKind;

pub type Proportion = Ratio<i64>;

/// Denominator of the standard error `sqrt(p̂(1 - p̂) / d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeDenominator {
    /// `d = n - 1`, the reporting convention.
    #[default]
    SampleMinusOne,
    /// `d = n`; kept for sensitivity checks only.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub k: u64,
    pub n: u64,
    #[serde(with = "ratio_string")]
    pub p0: Proportion,
    pub z: f64,
    pub p: f64,
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// One-sided test of `H1: p > p0` for `k` successes out of `n`.
pub fn ztest(k: u64, n: u64, p0: Proportion) -> Result<TestResult> {
    ztest_with(k, n, p0, SeDenominator::SampleMinusOne)
}

pub fn ztest_with(k: u64, n: u64, p0: Proportion, se: SeDenominator) -> Result<TestResult> {
    if n < 2 {
        return Err(Error::Invalid(format!("z-test needs n >= 2, got {n}")));
    }
    if k > n {
        return Err(Error::Invalid(format!("k = {k} exceeds n = {n}")));
    }
    let p0f = p0.to_f64().unwrap_or(f64::NAN);
    if !(p0f > 0.0 && p0f < 1.0) {
        return Err(Error::Invalid(format!("null proportion {p0} outside (0, 1)")));
    }
    let nf = n as f64;
    let phat = k as f64 / nf;
    let (z, p) = if k == n {
        (f64::INFINITY, 0.0)
    } else if k == 0 {
        (f64::NEG_INFINITY, 1.0)
    } else {
        let denom = match se {
            SeDenominator::SampleMinusOne => nf - 1.0,
            SeDenominator::Sample => nf,
        };
        let z = (phat - p0f) / (phat * (1.0 - phat) / denom).sqrt();
        (z, 1.0 - standard_normal_cdf(z))
    };
    Ok(TestResult { k, n, p0, z, p })
}

/// Table-style p-value: `<.001`, `1.00`, or three decimals without the
/// leading zero.
pub fn format_p(p: f64) -> String {
    if p < 0.0005 {
        "<.001".to_string()
    } else if p > 0.9995 {
        "1.00".to_string()
    } else {
        let s = format!("{p:.3}");
        s.trim_start_matches('0').to_string()
    }
}

/// Expected accuracy of a uniformly random predictor.
///
/// `None` is the standard method (one of three choices); a ground-truth
/// kind averages `|GT| / 8` over the records included under it.
pub fn random_baseline(gt: Option<GtKind>, dataset: &[DatasetRecord]) -> Result<Proportion> {
    let Some(kind) = gt else {
        return Ok(Proportion::new(1, 3));
    };
    let mut total = 0i64;
    let mut n = 0i64;
    for r in dataset.iter().filter(|r| r.included_in(kind)) {
        total += r.gt_set(kind)?.len() as i64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyEvaluation(format!("no instances included under {kind}")));
    }
    Ok(Proportion::new(total, 8 * n))
}

/// Published p-values for accuracies on the 25-question value test sets and
/// the 100-question bet test sets, all against a 1/3 null.
pub const P_VALUE_FIXTURES: [(u64, u64, &str); 15] = [
    (17, 25, "<.001"),
    (9, 25, ".392"),
    (14, 25, ".013"),
    (13, 25, ".033"),
    (6, 25, ".857"),
    (12, 25, ".075"),
    (11, 25, ".146"),
    (10, 25, ".252"),
    (43, 100, ".026"),
    (42, 100, ".040"),
    (35, 100, ".364"),
    (47, 100, ".003"),
    (29, 100, ".829"),
    (27, 100, ".922"),
    (49, 100, "<.001"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureOutcome {
    pub k: u64,
    pub n: u64,
    pub expected: String,
    pub actual: String,
    pub p: f64,
}

impl FixtureOutcome {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

pub fn run_p_value_fixtures(se: SeDenominator) -> Vec<FixtureOutcome> {
    P_VALUE_FIXTURES
        .iter()
        .map(|&(k, n, expected)| {
            let p = ztest_with(k, n, Proportion::new(1, 3), se)
                .expect("fixture inputs are valid")
                .p;
            FixtureOutcome {
                k,
                n,
                expected: expected.to_string(),
                actual: format_p(p),
                p,
            }
        })
        .collect()
}

pub(crate) mod ratio_string {
    use super::Proportion;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Proportion, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Proportion, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|_| D::Error::custom(format!("bad ratio `{s}`")))
    }
}
