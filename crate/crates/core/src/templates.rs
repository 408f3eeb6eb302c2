//! Value-question and bet-question templates and dataset generation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Item, Split, Tier};
use crate::error::{Error, Result};
use crate::hashing::stable_u64;

/// Number of answer choices in every instance.
pub const NUM_CHOICES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueTemplateKind {
    BooleanExpensive,
    BooleanValuable,
    ChoiceExpensive,
    ChoiceValuable,
}

impl ValueTemplateKind {
    pub const ALL: [ValueTemplateKind; 4] = [
        ValueTemplateKind::BooleanExpensive,
        ValueTemplateKind::BooleanValuable,
        ValueTemplateKind::ChoiceExpensive,
        ValueTemplateKind::ChoiceValuable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueTemplateKind::BooleanExpensive => "boolean_expensive",
            ValueTemplateKind::BooleanValuable => "boolean_valuable",
            ValueTemplateKind::ChoiceExpensive => "choice_expensive",
            ValueTemplateKind::ChoiceValuable => "choice_valuable",
        }
    }

    fn adjective(self) -> &'static str {
        match self {
            ValueTemplateKind::BooleanExpensive | ValueTemplateKind::ChoiceExpensive => "expensive",
            ValueTemplateKind::BooleanValuable | ValueTemplateKind::ChoiceValuable => "valuable",
        }
    }
}

impl fmt::Display for ValueTemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueTemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "boolean_expensive" | "be" => Ok(ValueTemplateKind::BooleanExpensive),
            "boolean_valuable" | "bv" => Ok(ValueTemplateKind::BooleanValuable),
            "choice_expensive" | "ce" => Ok(ValueTemplateKind::ChoiceExpensive),
            "choice_valuable" | "cv" => Ok(ValueTemplateKind::ChoiceValuable),
            _ => Err(Error::Invalid(format!("unknown value template `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetModality {
    Coin,
    Dice,
    Card,
}

impl BetModality {
    pub const ALL: [BetModality; 3] = [BetModality::Coin, BetModality::Dice, BetModality::Card];

    pub fn as_str(self) -> &'static str {
        match self {
            BetModality::Coin => "coin",
            BetModality::Dice => "dice",
            BetModality::Card => "card",
        }
    }

    /// The two equiprobable outcomes, in choice order.
    pub fn outcomes(self) -> [&'static str; 2] {
        match self {
            BetModality::Coin => ["heads", "tails"],
            BetModality::Dice => ["even", "odd"],
            BetModality::Card => ["red", "black"],
        }
    }
}

impl fmt::Display for BetModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BetModality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coin" => Ok(BetModality::Coin),
            "dice" => Ok(BetModality::Dice),
            "card" => Ok(BetModality::Card),
            _ => Err(Error::Invalid(format!("unknown bet modality `{s}`"))),
        }
    }
}

/// Which outcome carries the win event, and which item is won.
///
/// `win_tier == High` is a type-1 question (betting on the win outcome is
/// strictly optimal); `Low` is type-2 (not betting is optimal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BetVariant {
    pub win_outcome: u8,
    pub win_tier: Tier,
}

impl BetVariant {
    /// Generation order of the four variants per item pair.
    pub const ALL: [BetVariant; 4] = [
        BetVariant { win_outcome: 0, win_tier: Tier::High },
        BetVariant { win_outcome: 0, win_tier: Tier::Low },
        BetVariant { win_outcome: 1, win_tier: Tier::High },
        BetVariant { win_outcome: 1, win_tier: Tier::Low },
    ];

    pub fn lose_outcome(self) -> u8 {
        1 - self.win_outcome
    }

    /// The same bet seen by someone who ranks the two items the other way
    /// round.
    pub fn role_swapped(self) -> BetVariant {
        BetVariant {
            win_outcome: self.win_outcome,
            win_tier: self.win_tier.other(),
        }
    }

    fn suffix(self) -> String {
        let tier = match self.win_tier {
            Tier::High => 'H',
            Tier::Low => 'L',
        };
        format!("w{}{}", self.win_outcome, tier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceKind {
    Value {
        template: ValueTemplateKind,
        high: String,
        low: String,
    },
    Bet {
        modality: BetModality,
        high: String,
        low: String,
        variant: BetVariant,
    },
}

impl InstanceKind {
    pub fn items(&self) -> (&str, &str) {
        match self {
            InstanceKind::Value { high, low, .. } | InstanceKind::Bet { high, low, .. } => {
                (high, low)
            }
        }
    }

    pub fn is_bet(&self) -> bool {
        matches!(self, InstanceKind::Bet { .. })
    }

    /// Deterministic identifier derived from the kind fields alone.
    pub fn id(&self) -> String {
        match self {
            InstanceKind::Value { template, high, low } => {
                format!("value-{template}-{high}-{low}")
            }
            InstanceKind::Bet { modality, high, low, variant } => {
                format!("bet-{modality}-{high}-{low}-{}", variant.suffix())
            }
        }
    }
}

/// One multiple-choice question with exactly three choices.
///
/// In canonical order value choices are `[h-statement, l-statement,
/// equal-statement]` and bet choices are `[bet outcome 0, bet outcome 1,
/// no bet]`. When `permutation` is set, `choices[j]` holds canonical choice
/// `permutation[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqaInstance {
    pub id: String,
    #[serde(flatten)]
    pub kind: InstanceKind,
    pub prompt: String,
    pub choices: [String; NUM_CHOICES],
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<[usize; NUM_CHOICES]>,
}

impl McqaInstance {
    /// The prompt/choice pairings handed to a scorer, one per choice.
    pub fn pairs(&self) -> [String; NUM_CHOICES] {
        self.choices
            .each_ref()
            .map(|c| format!("{} {}", self.prompt, c))
    }

    /// Displayed position of a canonical choice index.
    pub fn display_index(&self, canonical: usize) -> usize {
        match self.permutation {
            None => canonical,
            Some(p) => p.iter().position(|&c| c == canonical).expect("valid permutation"),
        }
    }

    /// Canonical index of the choice shown at `display`.
    pub fn canonical_index(&self, display: usize) -> usize {
        match self.permutation {
            None => display,
            Some(p) => p[display],
        }
    }

    fn shuffled(mut self, perm: [usize; NUM_CHOICES]) -> Self {
        let canonical = self.choices.clone();
        self.choices = perm.map(|c| canonical[c].clone());
        self.permutation = Some(perm);
        self
    }
}

fn check_pair(high: &Item, low: &Item) -> Result<()> {
    if high.tier != Tier::High {
        return Err(Error::TierMismatch {
            item: high.name.clone(),
            expected: Tier::High.to_string(),
            actual: high.tier.to_string(),
        });
    }
    if low.tier != Tier::Low {
        return Err(Error::TierMismatch {
            item: low.name.clone(),
            expected: Tier::Low.to_string(),
            actual: low.tier.to_string(),
        });
    }
    if high.split != low.split {
        return Err(Error::SplitMismatch {
            high: high.name.clone(),
            low: low.name.clone(),
        });
    }
    Ok(())
}

pub fn render_value(kind: ValueTemplateKind, high: &Item, low: &Item) -> Result<McqaInstance> {
    check_pair(high, low)?;
    let (h, l) = (high.name.as_str(), low.name.as_str());
    let adj = kind.adjective();
    let (prompt, choices) = match kind {
        ValueTemplateKind::BooleanExpensive | ValueTemplateKind::BooleanValuable => (
            "This statement is true:".to_string(),
            [
                format!("{h} is more {adj} than {l}"),
                format!("{l} is more {adj} than {h}"),
                format!("{h} and {l} have the same value"),
            ],
        ),
        ValueTemplateKind::ChoiceExpensive | ValueTemplateKind::ChoiceValuable => (
            format!("From {h} and {l}, choose an item that is more {adj}:"),
            [h.to_string(), l.to_string(), "the same".to_string()],
        ),
    };
    let kind = InstanceKind::Value {
        template: kind,
        high: h.to_string(),
        low: l.to_string(),
    };
    Ok(McqaInstance {
        id: kind.id(),
        kind,
        prompt,
        choices,
        split: high.split,
        permutation: None,
    })
}

pub fn render_bet(
    modality: BetModality,
    high: &Item,
    low: &Item,
    variant: BetVariant,
) -> Result<McqaInstance> {
    check_pair(high, low)?;
    if variant.win_outcome > 1 {
        return Err(Error::Invalid(format!(
            "win_outcome must be 0 or 1, got {}",
            variant.win_outcome
        )));
    }
    let item_for = |tier: Tier| match tier {
        Tier::High => high.name.as_str(),
        Tier::Low => low.name.as_str(),
    };
    // Sentence order always follows outcome order; the win/lose events move.
    let mut events = [("", ""); 2];
    events[variant.win_outcome as usize] = ("win", item_for(variant.win_tier));
    events[variant.lose_outcome() as usize] = ("lose", item_for(variant.win_tier.other()));
    let [o0, o1] = modality.outcomes();
    let [(v0, i0), (v1, i1)] = events;
    let body = match modality {
        BetModality::Coin => format!(
            "If the coin comes up {o0}, then I {v0} a {i0}. If it comes up {o1}, then I {v1} a {i1}."
        ),
        BetModality::Dice => format!(
            "If the dice comes up {o0}, then I {v0} a {i0}. If it comes up {o1}, then I {v1} a {i1}."
        ),
        BetModality::Card => format!(
            "If I pick a card from a standard deck of cards, and the card is {o0} then I {v0} a {i0}. If it is {o1}, then I {v1} a {i1}."
        ),
    };
    let prompt = format!("{body} What should I do to maximize my expected gains?");
    let choices = [
        format!("I should bet on {o0}"),
        format!("I should bet on {o1}"),
        "I should not bet on either one".to_string(),
    ];
    let kind = InstanceKind::Bet {
        modality,
        high: high.name.clone(),
        low: low.name.clone(),
        variant,
    };
    Ok(McqaInstance {
        id: kind.id(),
        kind,
        prompt,
        choices,
        split: high.split,
        permutation: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSpec {
    Value { template: ValueTemplateKind },
    Bet { modality: BetModality },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GenerateOptions {
    /// When set, permute each instance's choices with a permutation derived
    /// from this seed and the instance id.
    pub shuffle_seed: Option<u64>,
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

pub fn generate(catalog: &Catalog, split: Split, spec: DatasetSpec) -> Vec<McqaInstance> {
    generate_with(catalog, split, spec, GenerateOptions::default())
}

pub fn generate_with(
    catalog: &Catalog,
    split: Split,
    spec: DatasetSpec,
    options: GenerateOptions,
) -> Vec<McqaInstance> {
    let mut out = Vec::new();
    for (high, low) in catalog.pairs(split) {
        match spec {
            DatasetSpec::Value { template } => {
                out.push(render_value(template, high, low).expect("catalog pairs are well-formed"));
            }
            DatasetSpec::Bet { modality } => {
                for variant in BetVariant::ALL {
                    out.push(
                        render_bet(modality, high, low, variant)
                            .expect("catalog pairs are well-formed"),
                    );
                }
            }
        }
    }
    if let Some(seed) = options.shuffle_seed {
        out = out
            .into_iter()
            .map(|inst| {
                let h = stable_u64(&[b"shuffle", &seed.to_le_bytes(), inst.id.as_bytes()]);
                let perm = PERMUTATIONS[(h % PERMUTATIONS.len() as u64) as usize];
                inst.shuffled(perm)
            })
            .collect();
    }
    out
}
