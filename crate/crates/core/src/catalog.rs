//! High-value and low-value item sets, partitioned into train/dev/test.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    High,
    Low,
}

impl Tier {
    pub fn other(self) -> Tier {
        match self {
            Tier::High => Tier::Low,
            Tier::Low => Tier::High,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::High => "high",
            Tier::Low => "low",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Item {
    pub name: String,
    pub tier: Tier,
    pub split: Split,
}

/// Immutable, validated item catalog.
///
/// Item order is significant: pairs and therefore instance order follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    items: Vec<Item>,
}

const TRAIN_HIGH: &[&str] = &[
    "airport",
    "airship",
    "bike",
    "bicycle",
    "bus",
    "camera",
    "gold",
    "supercar",
    "refrigerator",
    "jewelry",
    "hotel",
    "horse",
    "guitar",
    "tank",
];
const TRAIN_LOW: &[&str] = &[
    "baseball",
    "bread",
    "brush",
    "chair",
    "chocolate",
    "vegetable",
    "soup",
    "shirt",
    "orange",
    "knife",
    "fish",
    "cookie",
    "cigarette",
    "honey",
    "newspaper",
];
const DEV_HIGH: &[&str] = &["watch", "ipad", "phone", "tv", "telescope"];
const DEV_LOW: &[&str] = &["egg", "apple", "soda", "toothbrush", "toothpaste"];
const TEST_HIGH: &[&str] = &["car", "house", "diamond", "airplane", "computer"];
const TEST_LOW: &[&str] = &["pen", "paper", "water", "slipper", "sock"];

/// The built-in item sets.
pub fn default_catalog() -> Catalog {
    let buckets: [(Split, Tier, &[&str]); 6] = [
        (Split::Train, Tier::High, TRAIN_HIGH),
        (Split::Train, Tier::Low, TRAIN_LOW),
        (Split::Dev, Tier::High, DEV_HIGH),
        (Split::Dev, Tier::Low, DEV_LOW),
        (Split::Test, Tier::High, TEST_HIGH),
        (Split::Test, Tier::Low, TEST_LOW),
    ];
    let items = buckets
        .iter()
        .flat_map(|&(split, tier, names)| {
            names.iter().map(move |n| Item {
                name: (*n).to_string(),
                tier,
                split,
            })
        })
        .collect();
    Catalog::new(items).expect("built-in catalog is valid")
}

/// On-disk catalog document: one section per split, each with `high` and
/// `low` name arrays.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    #[serde(default)]
    pub train: SplitSection,
    #[serde(default)]
    pub dev: SplitSection,
    #[serde(default)]
    pub test: SplitSection,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default)]
    pub high: Vec<String>,
    #[serde(default)]
    pub low: Vec<String>,
}

/// Parses and validates a catalog document.
pub fn load_catalog(source: &str) -> Result<Catalog> {
    let file: CatalogFile =
        serde_json::from_str(source).map_err(|e| Error::parse("catalog", e))?;
    Catalog::from_file(file)
}

impl Catalog {
    pub fn new(items: Vec<Item>) -> Result<Self> {
        let mut seen = HashSet::new();
        for item in &items {
            if item.name.is_empty() {
                return Err(Error::Invalid("empty item name".into()));
            }
            if !seen.insert(item.name.as_str()) {
                return Err(Error::DuplicateItem(item.name.clone()));
            }
        }
        let catalog = Catalog { items };
        for split in Split::ALL {
            for tier in [Tier::High, Tier::Low] {
                if catalog.bucket(split, tier).next().is_none() {
                    return Err(Error::EmptyBucket {
                        split: split.to_string(),
                        tier: tier.to_string(),
                    });
                }
            }
        }
        Ok(catalog)
    }

    pub fn from_file(file: CatalogFile) -> Result<Self> {
        let mut items = Vec::new();
        for (split, section) in [
            (Split::Train, file.train),
            (Split::Dev, file.dev),
            (Split::Test, file.test),
        ] {
            for (tier, names) in [(Tier::High, section.high), (Tier::Low, section.low)] {
                items.extend(names.into_iter().map(|name| Item {
                    name: name.to_lowercase(),
                    tier,
                    split,
                }));
            }
        }
        Catalog::new(items)
    }

    pub fn to_file(&self) -> CatalogFile {
        let mut file = CatalogFile::default();
        for item in &self.items {
            let section = match item.split {
                Split::Train => &mut file.train,
                Split::Dev => &mut file.dev,
                Split::Test => &mut file.test,
            };
            match item.tier {
                Tier::High => section.high.push(item.name.clone()),
                Tier::Low => section.low.push(item.name.clone()),
            }
        }
        file
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn get(&self, name: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn bucket(&self, split: Split, tier: Tier) -> impl Iterator<Item = &Item> {
        self.items
            .iter()
            .filter(move |i| i.split == split && i.tier == tier)
    }

    /// Cross product of the split's high and low items, high-major in
    /// catalog order.
    pub fn pairs(&self, split: Split) -> Vec<(&Item, &Item)> {
        let lows: Vec<&Item> = self.bucket(split, Tier::Low).collect();
        self.bucket(split, Tier::High)
            .flat_map(|h| lows.iter().map(move |l| (h, *l)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bucket_sizes() {
        let c = default_catalog();
        let size = |s, t| c.bucket(s, t).count();
        assert_eq!(size(Split::Train, Tier::High), 14);
        assert_eq!(size(Split::Train, Tier::Low), 15);
        for s in [Split::Dev, Split::Test] {
            assert_eq!(size(s, Tier::High), 5);
            assert_eq!(size(s, Tier::Low), 5);
        }
    }

    #[test]
    fn known_items() {
        let c = default_catalog();
        let car = c.get("car").unwrap();
        assert_eq!((car.tier, car.split), (Tier::High, Split::Test));
        let tp = c.get("toothpaste").unwrap();
        assert_eq!((tp.tier, tp.split), (Tier::Low, Split::Dev));
        assert!(c.get("tank").is_some());
        assert!(c.get("gold").is_some());
    }

    #[test]
    fn pair_counts_and_order() {
        let c = default_catalog();
        assert_eq!(c.pairs(Split::Test).len(), 25);
        assert_eq!(c.pairs(Split::Train).len(), 210);
        let dev = c.pairs(Split::Dev);
        assert_eq!((dev[0].0.name.as_str(), dev[0].1.name.as_str()), ("watch", "egg"));
        assert_eq!((dev[1].0.name.as_str(), dev[1].1.name.as_str()), ("watch", "apple"));
        assert_eq!(dev[5].0.name, "ipad");
    }

    #[test]
    fn default_is_stable() {
        assert_eq!(default_catalog(), default_catalog());
    }

    #[test]
    fn round_trip_through_document() {
        let c = default_catalog();
        let text = serde_json::to_string(&c.to_file()).unwrap();
        assert_eq!(load_catalog(&text).unwrap(), c);
    }

    #[test]
    fn duplicate_rejected() {
        let doc = r#"{"train":{"high":["car"],"low":["pen"]},
                      "dev":{"high":["car"],"low":["egg"]},
                      "test":{"high":["house"],"low":["sock"]}}"#;
        match load_catalog(doc) {
            Err(Error::DuplicateItem(name)) => assert_eq!(name, "car"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_bucket_rejected() {
        let doc = r#"{"train":{"high":["car"],"low":["pen"]},
                      "dev":{"high":["tv"],"low":["egg"]},
                      "test":{"high":["house"],"low":[]}}"#;
        match load_catalog(doc) {
            Err(Error::EmptyBucket { split, tier }) => {
                assert_eq!((split.as_str(), tier.as_str()), ("test", "low"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_parse_error() {
        let doc = r#"{"validation":{"high":["car"],"low":["pen"]}}"#;
        assert!(matches!(load_catalog(doc), Err(Error::Parse { .. })));
        let doc = r#"{"train":{"medium":["car"]}}"#;
        assert!(matches!(load_catalog(doc), Err(Error::Parse { .. })));
    }
}
