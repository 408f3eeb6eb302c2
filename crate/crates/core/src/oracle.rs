//! Expected-gain algebra and ground-truth derivation.
//!
//! Gains are linear forms `a·H + b·L + c·X` over the value of the
//! high-value item `H`, the low-value item `L` and the implicit wager `X`,
//! with exact rational coefficients. The wager is assumed to lie strictly
//! inside `L < X < (H - L) / 2`, and signs are decided over that region.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::catalog::Tier;
use crate::error::{Error, Result};
use crate::templates::{BetVariant, InstanceKind, McqaInstance, NUM_CHOICES};

pub type Coef = Ratio<i64>;

fn half() -> Coef {
    Coef::new(1, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GainExpr {
    pub high: Coef,
    pub low: Coef,
    pub wager: Coef,
}

impl GainExpr {
    pub fn new(high: Coef, low: Coef, wager: Coef) -> Self {
        GainExpr { high, low, wager }
    }

    pub fn zero() -> Self {
        GainExpr::new(Coef::zero(), Coef::zero(), Coef::zero())
    }

    pub fn high_value() -> Self {
        GainExpr::new(Coef::from(1), Coef::zero(), Coef::zero())
    }

    pub fn low_value() -> Self {
        GainExpr::new(Coef::zero(), Coef::from(1), Coef::zero())
    }

    pub fn wager_amount() -> Self {
        GainExpr::new(Coef::zero(), Coef::zero(), Coef::from(1))
    }

    pub fn is_zero(&self) -> bool {
        self.high.is_zero() && self.low.is_zero() && self.wager.is_zero()
    }

    pub fn eval(&self, point: &WagerPoint) -> Coef {
        self.high * point.high + self.low * point.low + self.wager * point.wager
    }
}

impl Add for GainExpr {
    type Output = GainExpr;
    fn add(self, rhs: GainExpr) -> GainExpr {
        GainExpr::new(self.high + rhs.high, self.low + rhs.low, self.wager + rhs.wager)
    }
}

impl Sub for GainExpr {
    type Output = GainExpr;
    fn sub(self, rhs: GainExpr) -> GainExpr {
        self + (-rhs)
    }
}

impl Neg for GainExpr {
    type Output = GainExpr;
    fn neg(self) -> GainExpr {
        GainExpr::new(-self.high, -self.low, -self.wager)
    }
}

impl Mul<GainExpr> for Coef {
    type Output = GainExpr;
    fn mul(self, rhs: GainExpr) -> GainExpr {
        GainExpr::new(self * rhs.high, self * rhs.low, self * rhs.wager)
    }
}

impl fmt::Display for GainExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (coef, sym) in [(self.high, "H"), (self.low, "L"), (self.wager, "X")] {
            if coef.is_zero() {
                continue;
            }
            let sign = if coef.is_negative() { "-" } else { "+" };
            if first {
                if coef.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{}{sym}", coef.abs())?;
            first = false;
        }
        Ok(())
    }
}

/// A concrete `(H, L, X)` assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WagerPoint {
    pub high: Coef,
    pub low: Coef,
    pub wager: Coef,
}

impl WagerPoint {
    /// Whether the point lies in the open region `0 < L < X < (H - L)/2`.
    pub fn in_region(&self) -> bool {
        let zero = Coef::zero();
        zero < self.low
            && self.low < self.wager
            && self.wager < (self.high - self.low) * half()
    }
}

fn pt(h: (i64, i64), l: (i64, i64), x: (i64, i64)) -> WagerPoint {
    WagerPoint {
        high: Coef::new(h.0, h.1),
        low: Coef::new(l.0, l.1),
        wager: Coef::new(x.0, x.1),
    }
}

/// Interior points of the wager region used for sign analysis.
pub fn sample_points() -> [WagerPoint; 5] {
    [
        pt((10, 1), (1, 1), (3, 2)),
        pt((10, 1), (1, 1), (2, 1)),
        pt((10, 1), (1, 1), (22, 5)),
        pt((100, 1), (1, 1), (40, 1)),
        pt((16, 5), (1, 1), (21, 20)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
    Indeterminate,
}

/// Sign of `expr` over the wager region, by unanimous evaluation at the
/// sample points.
pub fn sign_of(expr: &GainExpr) -> Sign {
    if expr.is_zero() {
        return Sign::Zero;
    }
    let mut pos = 0;
    let mut neg = 0;
    for p in sample_points() {
        let v = expr.eval(&p);
        if v.is_positive() {
            pos += 1;
        } else if v.is_negative() {
            neg += 1;
        } else {
            return Sign::Indeterminate;
        }
    }
    match (pos, neg) {
        (_, 0) => Sign::Positive,
        (0, _) => Sign::Negative,
        _ => Sign::Indeterminate,
    }
}

fn determinate_sign(expr: &GainExpr) -> Result<Sign> {
    match sign_of(expr) {
        Sign::Indeterminate => Err(Error::IndeterminateSign(expr.to_string())),
        s => Ok(s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    BetWin,
    BetLose,
    NoBet,
}

/// Value of the item attached to the win or lose event, as a signed gain.
fn event_value(role: Role, variant: BetVariant) -> GainExpr {
    let item = |tier: Tier| match tier {
        Tier::High => GainExpr::high_value(),
        Tier::Low => GainExpr::low_value(),
    };
    match role {
        Role::BetWin => item(variant.win_tier),
        Role::BetLose => -item(variant.win_tier.other()),
        Role::NoBet => GainExpr::zero(),
    }
}

/// Expected gain of staking the whole wager on one choice.
///
/// Betting on an outcome returns its event plus the stake with probability
/// one half; the stake is paid either way.
pub fn role_gain(role: Role, variant: BetVariant) -> GainExpr {
    match role {
        Role::NoBet => GainExpr::zero(),
        Role::BetWin | Role::BetLose => {
            let x = GainExpr::wager_amount();
            half() * (event_value(role, variant) + x) - x
        }
    }
}

/// Role of canonical bet choice `choice`.
pub fn choice_role(choice: usize, variant: BetVariant) -> Role {
    match choice {
        2 => Role::NoBet,
        c if c == variant.win_outcome as usize => Role::BetWin,
        _ => Role::BetLose,
    }
}

/// A multi-label prediction: bit `i` set means choice `i` is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionSubset(u8);

impl PredictionSubset {
    pub const EMPTY: PredictionSubset = PredictionSubset(0);
    pub const FULL: PredictionSubset = PredictionSubset(0b111);

    pub fn from_mask(mask: u8) -> Option<Self> {
        (mask < 8).then_some(PredictionSubset(mask))
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        PredictionSubset(indices.iter().fold(0u8, |m, &i| {
            assert!(i < NUM_CHOICES, "choice index {i} out of range");
            m | (1 << i)
        }))
    }

    pub fn single(index: usize) -> Self {
        Self::from_indices(&[index])
    }

    pub fn all() -> impl Iterator<Item = PredictionSubset> {
        (0u8..8).map(PredictionSubset)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..NUM_CHOICES).filter(move |&i| self.contains(i))
    }

    pub fn is_subset_of(self, other: PredictionSubset) -> bool {
        self.0 & !other.0 == 0
    }

    fn map_indices(self, f: impl Fn(usize) -> usize) -> Self {
        PredictionSubset(self.indices().fold(0, |m, i| m | (1 << f(i))))
    }
}

impl fmt::Display for PredictionSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetGain {
    Gain(GainExpr),
    Contradiction,
    NonDecision,
}

/// Expected gain of a canonical-order bet prediction.
///
/// Selecting both bet choices splits the wager; the result is valued as the
/// mean of the two single-outcome gains.
pub fn subset_gain(subset: PredictionSubset, variant: BetVariant) -> SubsetGain {
    if subset.is_empty() {
        return SubsetGain::NonDecision;
    }
    if subset.contains(2) && subset.len() > 1 {
        return SubsetGain::Contradiction;
    }
    match subset.len() {
        1 => {
            let c = subset.indices().next().expect("singleton");
            SubsetGain::Gain(role_gain(choice_role(c, variant), variant))
        }
        _ => SubsetGain::Gain(
            half() * (role_gain(Role::BetWin, variant) + role_gain(Role::BetLose, variant)),
        ),
    }
}

/// The six threshold-method ground-truth variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtKind {
    Normal,
    WeakNormal,
    Weak,
    Strict,
    PositiveGain,
    NonNegativeGain,
}

impl GtKind {
    pub const VALUE: [GtKind; 3] = [GtKind::Normal, GtKind::WeakNormal, GtKind::Weak];
    pub const BET: [GtKind; 3] = [GtKind::Strict, GtKind::PositiveGain, GtKind::NonNegativeGain];

    pub fn for_bets(self) -> bool {
        matches!(self, GtKind::Strict | GtKind::PositiveGain | GtKind::NonNegativeGain)
    }

    pub fn applicable(is_bet: bool) -> [GtKind; 3] {
        if is_bet {
            GtKind::BET
        } else {
            GtKind::VALUE
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GtKind::Normal => "normal",
            GtKind::WeakNormal => "weak_normal",
            GtKind::Weak => "weak",
            GtKind::Strict => "strict",
            GtKind::PositiveGain => "positive_gain",
            GtKind::NonNegativeGain => "non_negative_gain",
        }
    }
}

impl fmt::Display for GtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GtKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        [GtKind::VALUE, GtKind::BET]
            .concat()
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown ground truth `{s}`")))
    }
}

fn bet_variant(inst: &McqaInstance) -> Result<BetVariant> {
    match inst.kind {
        InstanceKind::Bet { variant, .. } => Ok(variant),
        InstanceKind::Value { .. } => Err(Error::WrongKind {
            expected: "bet",
            id: inst.id.clone(),
        }),
    }
}

/// Canonical index of the unique gain-maximizing bet choice.
pub fn canonical_bet_optimum(variant: BetVariant, id: &str) -> Result<usize> {
    let gains: Vec<GainExpr> = (0..NUM_CHOICES)
        .map(|c| role_gain(choice_role(c, variant), variant))
        .collect();
    let mut best = None;
    for (c, gc) in gains.iter().enumerate() {
        let mut dominates = true;
        for (o, go) in gains.iter().enumerate() {
            if o != c && determinate_sign(&(*gc - *go))? != Sign::Positive {
                dominates = false;
            }
        }
        if dominates {
            if best.is_some() {
                return Err(Error::NonUniqueOptimum(id.to_string()));
            }
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::NonUniqueOptimum(id.to_string()))
}

/// Displayed index of the single correct choice under the standard method.
pub fn standard_gt(inst: &McqaInstance) -> Result<usize> {
    let canonical = match inst.kind {
        InstanceKind::Value { .. } => 0,
        InstanceKind::Bet { variant, .. } => canonical_bet_optimum(variant, &inst.id)?,
    };
    Ok(inst.display_index(canonical))
}

fn to_display(inst: &McqaInstance, mut sets: Vec<PredictionSubset>) -> Vec<PredictionSubset> {
    for s in &mut sets {
        *s = s.map_indices(|c| inst.display_index(c));
    }
    sets.sort();
    sets
}

/// Canonical-order correct subsets of a bet with the given variant.
pub fn canonical_bet_subsets(variant: BetVariant, kind: GtKind, id: &str) -> Result<Vec<PredictionSubset>> {
    let keep = |sign: Sign| match kind {
        GtKind::PositiveGain => sign == Sign::Positive,
        GtKind::NonNegativeGain => matches!(sign, Sign::Positive | Sign::Zero),
        _ => unreachable!(),
    };
    match kind {
        GtKind::Strict => Ok(vec![PredictionSubset::single(canonical_bet_optimum(variant, id)?)]),
        GtKind::PositiveGain | GtKind::NonNegativeGain => {
            let mut out = Vec::new();
            for s in PredictionSubset::all() {
                if let SubsetGain::Gain(e) = subset_gain(s, variant) {
                    if keep(determinate_sign(&e)?) {
                        out.push(s);
                    }
                }
            }
            Ok(out)
        }
        _ => Err(Error::Invalid(format!("{kind} is not a bet ground truth"))),
    }
}

/// Correct multi-label predictions (displayed order) for a bet instance.
pub fn bet_subset_gt(inst: &McqaInstance, kind: GtKind) -> Result<Vec<PredictionSubset>> {
    let variant = bet_variant(inst)?;
    Ok(to_display(inst, canonical_bet_subsets(variant, kind, &inst.id)?))
}

pub fn positive_applicable(inst: &McqaInstance) -> Result<bool> {
    Ok(!bet_subset_gt(inst, GtKind::PositiveGain)?.is_empty())
}

/// Correct multi-label predictions (displayed order) for a value instance.
pub fn value_subset_gt(inst: &McqaInstance, kind: GtKind) -> Result<Vec<PredictionSubset>> {
    if inst.kind.is_bet() {
        return Err(Error::WrongKind {
            expected: "value",
            id: inst.id.clone(),
        });
    }
    let canonical = match kind {
        GtKind::Normal => vec![PredictionSubset::single(0)],
        GtKind::WeakNormal => vec![PredictionSubset::single(0), PredictionSubset::from_indices(&[0, 2])],
        GtKind::Weak => {
            let both_strict = PredictionSubset::from_indices(&[0, 1]);
            PredictionSubset::all()
                .filter(|&s| !s.is_empty() && s != PredictionSubset::FULL && s != both_strict)
                .collect()
        }
        _ => return Err(Error::Invalid(format!("{kind} is not a value ground truth"))),
    };
    Ok(to_display(inst, canonical))
}

/// Dispatches to the value or bet derivation according to `kind`.
pub fn subset_gt(inst: &McqaInstance, kind: GtKind) -> Result<Vec<PredictionSubset>> {
    if kind.for_bets() {
        bet_subset_gt(inst, kind)
    } else {
        value_subset_gt(inst, kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;
    use crate::templates::{generate, render_bet, BetModality, DatasetSpec, ValueTemplateKind};
    use crate::catalog::Split;

    fn q(n: i64, d: i64) -> Coef {
        Coef::new(n, d)
    }

    fn expr(h: (i64, i64), l: (i64, i64), x: (i64, i64)) -> GainExpr {
        GainExpr::new(q(h.0, h.1), q(l.0, l.1), q(x.0, x.1))
    }

    const HIGH_WIN: BetVariant = BetVariant { win_outcome: 0, win_tier: Tier::High };
    const LOW_WIN: BetVariant = BetVariant { win_outcome: 0, win_tier: Tier::Low };

    fn s(idx: &[usize]) -> PredictionSubset {
        PredictionSubset::from_indices(idx)
    }

    fn bet(variant: BetVariant) -> McqaInstance {
        let c = default_catalog();
        render_bet(BetModality::Coin, c.get("car").unwrap(), c.get("pen").unwrap(), variant).unwrap()
    }

    #[test]
    fn sample_points_are_interior() {
        for p in sample_points() {
            assert!(p.in_region(), "{p:?}");
        }
        // H=10, L=1, X=2 witnesses non-emptiness.
        assert!(pt((10, 1), (1, 1), (2, 1)).in_region());
        assert!(!pt((10, 1), (1, 1), (1, 1)).in_region());
    }

    #[test]
    fn role_gains() {
        assert_eq!(role_gain(Role::BetWin, HIGH_WIN), expr((1, 2), (0, 1), (-1, 2)));
        assert_eq!(role_gain(Role::BetLose, HIGH_WIN), expr((0, 1), (-1, 2), (-1, 2)));
        assert_eq!(role_gain(Role::BetWin, LOW_WIN), expr((0, 1), (1, 2), (-1, 2)));
        assert_eq!(role_gain(Role::BetLose, LOW_WIN), expr((-1, 2), (0, 1), (-1, 2)));
        assert!(role_gain(Role::NoBet, HIGH_WIN).is_zero());
        assert!(role_gain(Role::NoBet, LOW_WIN).is_zero());
    }

    #[test]
    fn split_wager_gains() {
        assert_eq!(
            subset_gain(s(&[0, 1]), HIGH_WIN),
            SubsetGain::Gain(expr((1, 4), (-1, 4), (-1, 2)))
        );
        assert_eq!(
            subset_gain(s(&[0, 1]), LOW_WIN),
            SubsetGain::Gain(expr((-1, 4), (1, 4), (-1, 2)))
        );
    }

    #[test]
    fn contradictions_and_non_decision() {
        for v in BetVariant::ALL {
            assert_eq!(subset_gain(PredictionSubset::EMPTY, v), SubsetGain::NonDecision);
            for idx in [&[0, 2][..], &[1, 2], &[0, 1, 2]] {
                assert_eq!(subset_gain(s(idx), v), SubsetGain::Contradiction);
            }
            assert_eq!(subset_gain(s(&[2]), v), SubsetGain::Gain(GainExpr::zero()));
        }
    }

    #[test]
    fn signs() {
        assert_eq!(sign_of(&expr((1, 2), (0, 1), (-1, 2))), Sign::Positive);
        assert_eq!(sign_of(&expr((0, 1), (1, 2), (-1, 2))), Sign::Negative);
        assert_eq!(sign_of(&GainExpr::zero()), Sign::Zero);
        // X - 2L is positive at some sample points and negative at others.
        assert_eq!(sign_of(&expr((0, 1), (-2, 1), (1, 1))), Sign::Indeterminate);
        // H - 10 is zero at three of the points.
        assert_eq!(sign_of(&expr((1, 1), (-10, 1), (0, 1))), Sign::Indeterminate);
    }

    #[test]
    fn standard_answers() {
        assert_eq!(standard_gt(&bet(HIGH_WIN)).unwrap(), 0);
        assert_eq!(standard_gt(&bet(LOW_WIN)).unwrap(), 2);
        assert_eq!(standard_gt(&bet(BetVariant { win_outcome: 1, win_tier: Tier::High })).unwrap(), 1);
        assert_eq!(standard_gt(&bet(BetVariant { win_outcome: 1, win_tier: Tier::Low })).unwrap(), 2);
    }

    #[test]
    fn optimum_strictly_dominates() {
        for v in BetVariant::ALL {
            let best = canonical_bet_optimum(v, "t").unwrap();
            let gb = role_gain(choice_role(best, v), v);
            for o in (0..3).filter(|&o| o != best) {
                let go = role_gain(choice_role(o, v), v);
                assert_eq!(sign_of(&(gb - go)), Sign::Positive);
            }
        }
    }

    #[test]
    fn bet_subsets() {
        let hi = bet(HIGH_WIN);
        assert_eq!(bet_subset_gt(&hi, GtKind::Strict).unwrap(), vec![s(&[0])]);
        assert_eq!(bet_subset_gt(&hi, GtKind::PositiveGain).unwrap(), vec![s(&[0]), s(&[0, 1])]);
        assert_eq!(
            bet_subset_gt(&hi, GtKind::NonNegativeGain).unwrap(),
            vec![s(&[0]), s(&[0, 1]), s(&[2])]
        );
        let lo = bet(LOW_WIN);
        assert!(bet_subset_gt(&lo, GtKind::PositiveGain).unwrap().is_empty());
        assert_eq!(bet_subset_gt(&lo, GtKind::NonNegativeGain).unwrap(), vec![s(&[2])]);
        assert!(positive_applicable(&hi).unwrap());
        assert!(!positive_applicable(&lo).unwrap());
    }

    #[test]
    fn value_subsets() {
        let c = default_catalog();
        let inst = &generate(&c, Split::Test, DatasetSpec::Value { template: ValueTemplateKind::BooleanValuable })[0];
        assert_eq!(value_subset_gt(inst, GtKind::Normal).unwrap(), vec![s(&[0])]);
        assert_eq!(value_subset_gt(inst, GtKind::WeakNormal).unwrap(), vec![s(&[0]), s(&[0, 2])]);
        let weak = value_subset_gt(inst, GtKind::Weak).unwrap();
        assert_eq!(weak.len(), 5);
        assert!(!weak.contains(&s(&[0, 1])));
        assert!(!weak.contains(&PredictionSubset::FULL));
        assert!(!weak.contains(&PredictionSubset::EMPTY));
        assert!(matches!(positive_applicable(inst), Err(Error::WrongKind { .. })));
        assert!(matches!(value_subset_gt(&bet(HIGH_WIN), GtKind::Normal), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn gt_set_sizes_per_variant() {
        for v in BetVariant::ALL {
            let size = |k| canonical_bet_subsets(v, k, "t").unwrap().len();
            assert_eq!(size(GtKind::Strict), 1);
            match v.win_tier {
                Tier::High => {
                    assert_eq!(size(GtKind::PositiveGain), 2);
                    assert_eq!(size(GtKind::NonNegativeGain), 3);
                }
                Tier::Low => {
                    assert_eq!(size(GtKind::PositiveGain), 0);
                    assert_eq!(size(GtKind::NonNegativeGain), 1);
                }
            }
        }
    }

    #[test]
    fn display_formats() {
        assert_eq!(expr((1, 4), (-1, 4), (-1, 2)).to_string(), "1/4H - 1/4L - 1/2X");
        assert_eq!(expr((-1, 2), (0, 1), (-1, 2)).to_string(), "-1/2H - 1/2X");
        assert_eq!(s(&[0, 2]).to_string(), "{0,2}");
        assert_eq!("non-negative-gain".parse::<GtKind>().unwrap(), GtKind::NonNegativeGain);
    }
}
